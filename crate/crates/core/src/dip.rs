//! Deep-image-prior denoising of LS traces.
//!
//! The complex `M × N` trace is stacked into a real `2M × N` matrix and an
//! untrained DIP network is fitted to it from a fixed random input with ADAM.
//! The network output after a fixed iteration budget is the denoised trace.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::autodiff::Graph;
use crate::channel::{CMatrix, LsTrace};
use crate::error::{Error, Result};
use crate::meta::AdamState;
use crate::models::{dip_forward, dip_input, init_params, DipSpec};
use crate::rng;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct DipConfig {
    /// Hidden layers `L_d`.
    pub depth: usize,
    /// Filters per layer `M_i`.
    pub filters: usize,
    pub n_iter: usize,
    /// ADAM learning rate.
    pub lr: f64,
    /// Standard deviation of the fixed input entries.
    pub z_std: f64,
    /// Edge-replicate traces whose length is not a multiple of `2^(L_d−1)`.
    pub auto_pad: bool,
}

impl Default for DipConfig {
    fn default() -> Self {
        DipConfig {
            depth: 4,
            filters: 64,
            n_iter: 2000,
            lr: 1e-2,
            z_std: 0.1,
            auto_pad: true,
        }
    }
}

impl DipConfig {
    /// Network spec for an `antennas × slots` trace, and the padded length.
    pub fn spec_for(&self, antennas: usize, slots: usize) -> Result<(DipSpec, usize)> {
        if self.depth == 0 || self.depth > 20 {
            return Err(Error::Config(alloc::format!(
                "dip.depth = {} is out of range",
                self.depth
            )));
        }
        let unit = 1usize << (self.depth - 1);
        let padded = slots.div_ceil(unit).max(1) * unit;
        if padded != slots && !self.auto_pad {
            return Err(Error::Config(alloc::format!(
                "trace length {slots} is not a multiple of 2^(depth-1) = {unit}; \
                 pad it to {padded} slots or enable dip.auto_pad"
            )));
        }
        let spec = DipSpec {
            antennas,
            depth: self.depth,
            filters: self.filters,
            n1: padded / unit,
            n_iter: self.n_iter,
        };
        spec.validate()?;
        if !(self.lr > 0.0) || !(self.z_std > 0.0) {
            return Err(Error::Config("dip.lr and dip.z_std must be positive".into()));
        }
        Ok((spec, padded))
    }
}

/// Record of one denoising run.
#[derive(Clone, Debug)]
pub struct DipRun {
    pub spec: DipSpec,
    pub z1: Tensor,
    pub n_iter: usize,
    /// Objective `‖H − g(Z₁)‖²` before each ADAM step.
    pub loss_history: Vec<f64>,
    pub seed: u64,
    /// Denoised trace, cropped back to the input length.
    pub denoised: CMatrix,
}

/// Rows `0..M` hold real parts, rows `M..2M` imaginary parts.
pub fn stack_real(h: &CMatrix) -> Tensor {
    let (m, n) = h.shape();
    let mut data = alloc::vec![0.0; 2 * m * n];
    for i in 0..m {
        for j in 0..n {
            data[i * n + j] = h[(i, j)].re;
            data[(m + i) * n + j] = h[(i, j)].im;
        }
    }
    Tensor::matrix(2 * m, n, data).expect("shape matches length")
}

/// Inverse of [`stack_real`].
pub fn unstack_real(t: &Tensor) -> Result<CMatrix> {
    let (rows, n) = (t.rows(), t.cols());
    if rows % 2 != 0 {
        return Err(Error::dim("unstack_real", t.shape(), &[2]));
    }
    let m = rows / 2;
    Ok(CMatrix::from_fn(m, n, |i, j| {
        Complex64::new(t.get(i, j), t.get(m + i, j))
    }))
}

fn pad_edge(h: &CMatrix, len: usize) -> CMatrix {
    let n = h.ncols();
    CMatrix::from_fn(h.nrows(), len, |i, j| h[(i, j.min(n - 1))])
}

/// Fits the DIP network to `h_ls` and returns the denoised trace.
pub fn denoise(h_ls: &CMatrix, cfg: &DipConfig, seed: u64) -> Result<DipRun> {
    let (m, n) = h_ls.shape();
    if m == 0 || n == 0 {
        return Err(Error::Dataset("cannot denoise an empty trace".into()));
    }
    let (spec, padded) = cfg.spec_for(m, n)?;
    let target = stack_real(&pad_edge(h_ls, padded));
    let z1 = dip_input(&spec, cfg.z_std, seed);
    let mut params = init_params(&spec, rng::derive_seed(seed, "dip", 0));
    let mut adam = AdamState::new(&params);

    let mut loss_history = Vec::with_capacity(cfg.n_iter);
    for _ in 0..cfg.n_iter {
        let mut g = Graph::new();
        let vars = params.bind(&mut g);
        let z = g.constant(z1.clone());
        let y = g.constant(target.clone());
        let out = dip_forward(&mut g, &spec, &vars, z)?;
        let loss = g.sq_error(out, y)?;
        let value = g.value(loss).item();
        if !value.is_finite() {
            return Err(Error::NonFinite("DIP objective"));
        }
        loss_history.push(value);
        let grads = g.gradients(loss, &vars)?;
        adam.step(&mut params, &grads, cfg.lr)?;
    }

    let mut g = Graph::new();
    let vars: Vec<_> = params.tensors.iter().map(|t| g.constant(t.clone())).collect();
    let z = g.constant(z1.clone());
    let out = dip_forward(&mut g, &spec, &vars, z)?;
    let full = unstack_real(g.value(out))?;
    Ok(DipRun {
        spec,
        z1,
        n_iter: cfg.n_iter,
        loss_history,
        seed,
        denoised: full.columns(0, n).into_owned(),
    })
}

/// Denoises an LS trace, marking the result as denoised.
pub fn denoise_trace(ls: &LsTrace, cfg: &DipConfig, seed: u64) -> Result<(LsTrace, DipRun)> {
    let run = denoise(&ls.h_ls, cfg, seed)?;
    let out = LsTrace {
        ue_id: ls.ue_id,
        h_ls: run.denoised.clone(),
        snr_db: ls.snr_db,
        denoised: true,
    };
    Ok((out, run))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stack_single_antenna() {
        let h = CMatrix::from_row_slice(1, 2, &[Complex64::new(1.0, 2.0), Complex64::new(3.0, 4.0)]);
        let s = stack_real(&h);
        assert_eq!(s.shape(), &[2, 2]);
        assert_eq!(s.data(), &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(unstack_real(&s).unwrap(), h);
    }

    #[test]
    fn spec_pads_or_refuses() {
        let cfg = DipConfig {
            depth: 4,
            ..DipConfig::default()
        };
        let (spec, padded) = cfg.spec_for(4, 100).unwrap();
        assert_eq!(padded, 104);
        assert_eq!(spec.n1, 13);
        let strict = DipConfig { auto_pad: false, ..cfg };
        match strict.spec_for(4, 100) {
            Err(Error::Config(msg)) => assert!(msg.contains("104"), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert!(strict.spec_for(4, 128).is_ok());
    }

    #[test]
    fn padded_trace_keeps_shape_and_history() {
        let h = CMatrix::from_fn(2, 10, |i, j| Complex64::new((i + j) as f64 * 0.1, 0.05 * j as f64));
        let cfg = DipConfig {
            depth: 2,
            filters: 4,
            n_iter: 5,
            ..DipConfig::default()
        };
        let run = denoise(&h, &cfg, 3).unwrap();
        assert_eq!(run.denoised.shape(), (2, 10));
        assert_eq!(run.loss_history.len(), 5);
        assert_eq!(run.z1.shape(), &[4, 5]);
    }
}
