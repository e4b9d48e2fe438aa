//! Time-varying uplink channel traces, the pilot observation model and LS
//! estimation.
//!
//! Each UE sees `P` propagation paths. Path `p` has a complex Gaussian gain
//! `g_p`, an angle of arrival `θ_p` at a half-wavelength uniform linear array,
//! and a Doppler angle `φ_p`:
//!
//! ```text
//! h[m][n] = (1/√P) Σ_p g_p · exp(iπ m sin θ_p) · exp(i 2π f_D cos φ_p T_d n)
//! ```
//!
//! With uniform `φ_p` the ensemble autocorrelation at lag `τ` slots is
//! `J₀(2π f_D T_d τ)` and `E|h[m][n]|² = 1`, so `E‖h_n‖² = M`.

use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const SPEED_OF_LIGHT: f64 = 2.998e8;

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    /// BS antennas `M`.
    pub antennas: usize,
    /// UEs `K`.
    pub ues: usize,
    /// Slots per trace `N`.
    pub slots: usize,
    pub snr_db: f64,
    pub carrier_hz: f64,
    pub speed_kmh: f64,
    /// Slot duration `T_d` in seconds.
    pub slot_s: f64,
    pub paths: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    /// Carrier, mobility and slot timing of the reference system at 64 antennas.
    fn default() -> Self {
        SimConfig {
            antennas: 64,
            ues: 8,
            slots: 256,
            snr_db: 20.0,
            carrier_hz: 2.3e9,
            speed_kmh: 3.0,
            slot_s: 40e-3,
            paths: 20,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn doppler_hz(&self) -> f64 {
        self.speed_kmh / 3.6 * self.carrier_hz / SPEED_OF_LIGHT
    }

    /// Normalized Doppler `f_D · T_d`.
    pub fn normalized_doppler(&self) -> f64 {
        self.doppler_hz() * self.slot_s
    }

    pub fn snr_linear(&self) -> f64 {
        db_to_linear(self.snr_db)
    }

    /// Checks the invariants that hold for predictors of complexity order `n_o`.
    pub fn validate(&self, n_o: usize) -> Result<()> {
        if self.antennas == 0 {
            return Err(Error::Config("sim.antennas must be at least 1".into()));
        }
        if self.paths == 0 {
            return Err(Error::Config("sim.paths must be at least 1".into()));
        }
        if self.slots < n_o + 2 {
            return Err(Error::Config(alloc::format!(
                "sim.slots = {} is below n_o + 2 = {}",
                self.slots,
                n_o + 2
            )));
        }
        if !(self.slot_s > 0.0) {
            return Err(Error::Config("sim.slot_s must be positive".into()));
        }
        if !(self.carrier_hz > 0.0) || !(self.speed_kmh >= 0.0) {
            return Err(Error::Config(
                "sim.carrier_hz must be positive and sim.speed_kmh non-negative".into(),
            ));
        }
        Ok(())
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    Float::powf(10.0, db / 10.0)
}

/// True channel of one UE; column `n` is `h_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelTrace {
    pub ue_id: u32,
    pub h: CMatrix,
}

/// LS estimates of one UE's channel, possibly denoised.
#[derive(Clone, Debug, PartialEq)]
pub struct LsTrace {
    pub ue_id: u32,
    pub h_ls: CMatrix,
    pub snr_db: f64,
    pub denoised: bool,
}

pub(crate) fn complex_normal<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * core::f64::consts::FRAC_1_SQRT_2
}

/// Generates the channel trace of `ue_id`; a pure function of `(cfg, ue_id)`.
pub fn gen_trace(cfg: &SimConfig, ue_id: u32) -> ChannelTrace {
    let mut rng = rng::stream(cfg.seed, "sim", ue_id as u64);
    let (m, n, p) = (cfg.antennas, cfg.slots, cfg.paths);
    let fd_td = cfg.normalized_doppler();

    // steering (M × P) · diag(g) · doppler phasors (P × N)
    let mut steering = CMatrix::zeros(m, p);
    let mut phasors = CMatrix::zeros(p, n);
    let amp = 1.0 / (p as f64).sqrt();
    for path in 0..p {
        let gain = complex_normal(&mut rng) * amp;
        let aoa = rng.random_range(-PI..PI);
        let doppler_angle = rng.random_range(-PI..PI);
        let spatial = PI * aoa.sin();
        for ant in 0..m {
            steering[(ant, path)] = Complex64::from_polar(1.0, spatial * ant as f64) * gain;
        }
        let omega = 2.0 * PI * fd_td * doppler_angle.cos();
        for slot in 0..n {
            phasors[(path, slot)] = Complex64::from_polar(1.0, omega * slot as f64);
        }
    }
    ChannelTrace {
        ue_id,
        h: steering * phasors,
    }
}

/// Received pilots `y_n = √ρ h_n x_n + w_n` with `x_n = 1` and `w_n ~ CN(0, I_M)`.
pub fn receive(trace: &ChannelTrace, cfg: &SimConfig) -> CMatrix {
    let mut rng = rng::stream(cfg.seed, "noise", trace.ue_id as u64);
    let sqrt_rho = cfg.snr_linear().sqrt();
    trace.h.map(|h| h * sqrt_rho + complex_normal(&mut rng))
}

/// LS estimate `h_ls = y / (√ρ x)`, `x = 1`.
pub fn ls_estimate(y: &CMatrix, ue_id: u32, cfg: &SimConfig) -> Result<LsTrace> {
    let rho = cfg.snr_linear();
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Config(alloc::format!(
            "LS estimation needs a positive finite SNR, got {} dB",
            cfg.snr_db
        )));
    }
    let inv = 1.0 / rho.sqrt();
    Ok(LsTrace {
        ue_id,
        h_ls: y.map(|v| v * inv),
        snr_db: cfg.snr_db,
        denoised: false,
    })
}

/// Convenience: true traces and their LS estimates for `ue_ids`.
pub fn simulate(
    cfg: &SimConfig,
    ue_ids: impl IntoIterator<Item = u32>,
) -> Result<alloc::vec::Vec<(ChannelTrace, LsTrace)>> {
    ue_ids
        .into_iter()
        .map(|ue| {
            let trace = gen_trace(cfg, ue);
            let y = receive(&trace, cfg);
            let ls = ls_estimate(&y, ue, cfg)?;
            Ok((trace, ls))
        })
        .collect()
}
