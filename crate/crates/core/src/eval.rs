//! Prediction metrics: NMSE, zero-forcing combining with achievable rates,
//! and FLOP estimates of the MAML predictor and the DIP denoiser.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::Complex;

#[allow(unused_imports)]
use num_traits::Float;

use crate::channel::{db_to_linear, CMatrix, CVector};
use crate::error::{Error, Result};

/// Condition numbers above this make [`zf_combiner`] refuse the matrix.
pub const MAX_CONDITION: f64 = 1e12;

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Mean of `‖ĥ − h‖² / ‖h‖²` over samples.
pub fn nmse(pred: &[CVector], truth: &[CVector]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::Evaluation(alloc::format!(
            "NMSE needs equal non-zero sample counts, got {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    let mut total = 0.0;
    for (i, (p, h)) in pred.iter().zip(truth).enumerate() {
        if p.len() != h.len() {
            return Err(Error::dim("nmse", &[p.len()], &[h.len()]));
        }
        let energy = h.norm_squared();
        if energy == 0.0 {
            return Err(Error::Evaluation(alloc::format!("true channel {i} has zero norm")));
        }
        total += (p - h).norm_squared() / energy;
    }
    Ok(total / pred.len() as f64)
}

fn condition_number(h: &CMatrix) -> f64 {
    let sv = h.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Unit-norm zero-forcing combiners, one per column of `h_hat` (`M × K`).
///
/// Column `k` of the result is `f_k` with `f_kᵀ ĥ_i = 0` for `i ≠ k`:
/// `F̄ᵀ = (ĤᴴĤ)⁻¹Ĥᴴ`, evaluated as `R⁻¹Qᴴ` from a thin QR of `Ĥ`.
pub fn zf_combiner(h_hat: &CMatrix) -> Result<CMatrix> {
    let (m, k) = h_hat.shape();
    if k == 0 || k > m {
        return Err(Error::Evaluation(alloc::format!(
            "ZF needs 1 <= K <= M, got K = {k}, M = {m}"
        )));
    }
    let cond = condition_number(h_hat);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::Singular(cond));
    }
    let qr = h_hat.clone().qr();
    let (q, r) = (qr.q(), qr.r());
    let pinv = r.solve_upper_triangular(&q.adjoint()).ok_or(Error::Singular(cond))?;
    let mut f = pinv.transpose();
    for mut col in f.column_iter_mut() {
        let norm = col.norm();
        col /= Complex::new(norm, 0.0);
    }
    Ok(f)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub per_ue: Vec<f64>,
    pub sum: f64,
}

/// Achievable ZF rates: combiners from `h_hat`, evaluated on `h_true`.
pub fn sum_rate(h_true: &CMatrix, h_hat: &CMatrix, snr_db: f64) -> Result<RateReport> {
    if h_true.shape() != h_hat.shape() {
        return Err(Error::dim(
            "sum_rate",
            &[h_true.nrows(), h_true.ncols()],
            &[h_hat.nrows(), h_hat.ncols()],
        ));
    }
    let rho = db_to_linear(snr_db);
    let f = zf_combiner(h_hat)?;
    // gains[(k, i)] = f_kᵀ h_i
    let gains = f.transpose() * h_true;
    let k = h_true.ncols();
    let per_ue: Vec<f64> = (0..k)
        .map(|ue| {
            let signal = gains[(ue, ue)].norm_sqr();
            let interference: f64 = (0..k).filter(|&i| i != ue).map(|i| gains[(ue, i)].norm_sqr()).sum();
            (1.0 + rho * signal / (rho * interference + 1.0)).log2()
        })
        .collect();
    Ok(RateReport {
        sum: per_ue.iter().sum(),
        per_ue,
    })
}

/// Exact operation counts (integer arithmetic).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FlopsReport {
    pub train: u128,
    pub adapt: u128,
    pub test: u128,
    pub total: u128,
    pub dip: u128,
}

/// Inputs of the MAML cost model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MamlCost {
    pub n_epoch: u64,
    /// Source tasks `T_S`.
    pub tasks: u64,
    /// Meta-training pairs per task `N_mt = N_s + N_q`.
    pub pairs_per_task: u64,
    pub t_ad: u64,
    pub n_ad: u64,
    pub n_te: u64,
    pub n_o: u64,
    pub hidden_layers: u64,
    pub hidden_width: u64,
    pub antennas: u64,
}

impl MamlCost {
    /// Cost of one sample pass, `γ(n_o + (L−1)γ + 1)M²` with `γ = n_l / M`,
    /// written as `n_l(n_o M + (L−1) n_l + M)` so it stays integral.
    pub fn per_sample(&self) -> u128 {
        let (nl, m) = (self.hidden_width as u128, self.antennas as u128);
        let l = self.hidden_layers as u128;
        nl * (self.n_o as u128 * m + l.saturating_sub(1) * nl + m)
    }
}

/// Stage costs of the MAML predictor; `dip` is left at zero.
pub fn flops_maml(c: &MamlCost) -> FlopsReport {
    let per = c.per_sample();
    let train = c.n_epoch as u128 * c.tasks as u128 * c.pairs_per_task as u128 * per;
    let adapt = c.t_ad as u128 * c.n_ad as u128 * per;
    let test = c.n_te as u128 * per;
    FlopsReport {
        train,
        adapt,
        test,
        total: train + adapt + test,
        dip: 0,
    }
}

/// DIP cost `N_iter · N_t · N_f · (2 N_f + M)`.
pub fn flops_dip(n_iter: u64, n_t: u64, n_f: u64, antennas: u64) -> u128 {
    n_iter as u128 * n_t as u128 * n_f as u128 * (2 * n_f as u128 + antennas as u128)
}

/// One evaluated (method, sweep point, seed) combination.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub seed: u64,
    pub snr_db: f64,
    pub n_ad: usize,
    pub t_ad: usize,
    pub method: String,
    pub nmse_linear: f64,
    pub nmse_db: f64,
    pub sum_rate_bits: f64,
    pub per_ue_rates: Vec<f64>,
    pub flops: FlopsReport,
    /// Free-form echo of the run configuration (e.g. its hash).
    pub config_echo: String,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str = "seed,snr_db,n_ad,t_ad,method,nmse_db,sum_rate,flops_total";

    /// Builds a report; `nmse_db` and the rate sum are derived.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        seed: u64,
        snr_db: f64,
        n_ad: usize,
        t_ad: usize,
        method: &str,
        nmse_linear: f64,
        per_ue_rates: Vec<f64>,
        flops: FlopsReport,
    ) -> Self {
        EvalReport {
            seed,
            snr_db,
            n_ad,
            t_ad,
            method: method.into(),
            nmse_linear,
            nmse_db: to_db(nmse_linear),
            sum_rate_bits: per_ue_rates.iter().sum(),
            per_ue_rates,
            flops,
            config_echo: String::new(),
        }
    }

    /// CSV row in [`Self::CSV_HEADER`] order; floats use shortest round-trip form.
    pub fn csv_row(&self) -> String {
        alloc::format!(
            "{},{},{},{},{},{},{},{}",
            self.seed,
            self.snr_db,
            self.n_ad,
            self.t_ad,
            self.method,
            self.nmse_db,
            self.sum_rate_bits,
            self.flops.total
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn nmse_basic_cases() {
        let h = alloc::vec![CVector::from_vec(alloc::vec![c(1.0, 2.0), c(-0.5, 0.0)])];
        assert_eq!(nmse(&h, &h).unwrap(), 0.0);
        let zero = alloc::vec![CVector::zeros(2)];
        assert_eq!(nmse(&zero, &h).unwrap(), 1.0);
        let twice = alloc::vec![&h[0] * c(2.0, 0.0)];
        assert!((nmse(&twice, &h).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(nmse(&h, &zero), Err(Error::Evaluation(_))));
        assert!(nmse(&[], &[]).is_err());
    }

    #[test]
    fn single_ue_combiner_is_matched_filter() {
        let h = CMatrix::from_column_slice(3, 1, &[c(1.0, 1.0), c(0.0, -2.0), c(0.5, 0.0)]);
        let f = zf_combiner(&h).unwrap();
        let expect = h.map(|v| v.conj()) / c(h.norm(), 0.0);
        assert!((f - expect).norm() < 1e-12);
    }

    #[test]
    fn orthogonal_columns_null_exactly() {
        let h = CMatrix::from_column_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 3.0)]);
        let f = zf_combiner(&h).unwrap();
        let g = f.transpose() * &h;
        assert_eq!(g[(0, 1)].norm(), 0.0);
        assert_eq!(g[(1, 0)].norm(), 0.0);
    }

    #[test]
    fn rank_deficient_is_rejected() {
        let h = CMatrix::from_column_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)]);
        assert!(matches!(zf_combiner(&h), Err(Error::Singular(_))));
        let wide = CMatrix::zeros(2, 3);
        assert!(matches!(zf_combiner(&wide), Err(Error::Evaluation(_))));
    }

    #[test]
    fn zero_snr_gives_zero_rate() {
        let h = CMatrix::from_column_slice(2, 1, &[c(1.0, 0.0), c(0.0, 1.0)]);
        let r = sum_rate(&h, &h, f64::NEG_INFINITY).unwrap();
        assert_eq!(r.sum, 0.0);
    }

    #[test]
    fn two_by_two_rate_by_hand() {
        // Ĥ = I → f_1 = e_1, f_2 = e_2; H = [[1, 0.5], [0, 1]] (columns h_1, h_2)
        // R_1 = log2(1 + ρ·1 / (ρ·0.25 + 1)), R_2 = log2(1 + ρ·1 / (0 + 1))
        let hat = CMatrix::identity(2, 2);
        let h = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let r = sum_rate(&h, &hat, 10.0).unwrap();
        let r1 = (1.0f64 + 10.0 / (2.5 + 1.0)).log2();
        let r2 = (1.0f64 + 10.0).log2();
        assert!((r.per_ue[0] - r1).abs() < 1e-12);
        assert!((r.per_ue[1] - r2).abs() < 1e-12);
        assert!((r.sum - r1 - r2).abs() < 1e-12);
    }

    fn reference_cost() -> MamlCost {
        MamlCost {
            n_epoch: 20,
            tasks: 4096,
            pairs_per_task: 20,
            t_ad: 10,
            n_ad: 20,
            n_te: 100,
            n_o: 3,
            hidden_layers: 4,
            hidden_width: 512,
            antennas: 64,
        }
    }

    #[test]
    fn maml_flops_reference_values() {
        let c = reference_cost();
        assert_eq!(c.per_sample(), 917_504);
        let r = flops_maml(&c);
        assert_eq!(r.train, 1_638_400 * 917_504);
        assert_eq!(r.adapt, 200 * 917_504);
        assert_eq!(r.test, 100 * 917_504);
        assert_eq!(r.total, r.train + r.adapt + r.test);
    }

    #[test]
    fn maml_flops_test_only() {
        let c = MamlCost {
            n_epoch: 0,
            t_ad: 0,
            n_te: 1,
            ..reference_cost()
        };
        let r = flops_maml(&c);
        // γ(n_o + (L−1)γ + 1)M² with γ = 8
        assert_eq!(r.total, 8 * (3 + 3 * 8 + 1) * 64 * 64);
        assert_eq!(r.train, 0);
    }

    #[test]
    fn dip_flops_reference_values() {
        assert_eq!(flops_dip(0, 128, 64, 64), 0);
        assert_eq!(flops_dip(2000, 128, 64, 64), 3_145_728_000);
        let (a, b) = (flops_dip(1, 1, 1000, 1), flops_dip(1, 1, 2000, 1));
        assert!((b as f64 / a as f64 - 4.0).abs() < 0.01);
    }

    #[test]
    fn report_csv_row() {
        let r = EvalReport::new(
            3,
            20.0,
            20,
            10,
            "maml",
            0.1,
            alloc::vec![1.5, 2.5],
            FlopsReport {
                total: 42,
                ..Default::default()
            },
        );
        assert_eq!(r.sum_rate_bits, 4.0);
        assert_eq!(r.csv_row(), "3,20,20,10,maml,-10,4,42");
        assert_eq!(
            EvalReport::CSV_HEADER.split(',').count(),
            r.csv_row().split(',').count()
        );
    }
}
