use chanpred_core::channel::{CMatrix, CVector};
use chanpred_core::eval::{nmse, sum_rate, zf_combiner};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_channel(rng: &mut ChaCha8Rng, m: usize, k: usize) -> CMatrix {
    CMatrix::from_fn(m, k, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

/// Normalized rows of `(ĤᴴĤ)⁻¹Ĥᴴ`, transposed: an independent ZF path.
fn explicit_zf(h: &CMatrix) -> CMatrix {
    let gram = h.adjoint() * h;
    let pinv = gram.try_inverse().unwrap() * h.adjoint();
    let mut f = pinv.transpose();
    for mut c in f.column_iter_mut() {
        let n = c.norm();
        c /= Complex64::new(n, 0.0);
    }
    f
}

#[test]
fn random_four_by_two_matches_explicit_pseudo_inverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let h = random_channel(&mut rng, 4, 2);
        let f = zf_combiner(&h).unwrap();
        assert!((&f - explicit_zf(&h)).norm() < 1e-10);
        let g = f.transpose() * &h;
        assert!(g[(0, 1)].norm() <= 1e-9 && g[(1, 0)].norm() <= 1e-9);
    }
}

#[test]
fn perfect_csi_beats_noisy_csi_in_the_median() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut wins = 0;
    let trials = 40;
    for _ in 0..trials {
        let h = random_channel(&mut rng, 8, 4);
        let noisy = &h + random_channel(&mut rng, 8, 4) * Complex64::new(0.2, 0.0);
        let perfect = sum_rate(&h, &h, 20.0).unwrap().sum;
        let imperfect = sum_rate(&h, &noisy, 20.0).unwrap().sum;
        if perfect >= imperfect {
            wins += 1;
        }
    }
    assert!(wins * 2 > trials, "{wins}/{trials}");
}

#[test]
fn single_user_rate_is_matched_filter_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = random_channel(&mut rng, 8, 1);
    let rho: f64 = 10f64.powf(1.3);
    let r = sum_rate(&h, &h, 13.0).unwrap();
    let expected = (1.0 + rho * h.norm_squared()).log2();
    assert!((r.sum - expected).abs() <= 1e-9 * expected);
}

proptest! {
    #[test]
    fn nmse_of_scaled_truth(alpha in -3.0f64..3.0, re in -2.0f64..2.0, im in 0.1f64..2.0) {
        let h = vec![CVector::from_vec(vec![Complex64::new(re, im), Complex64::new(im, -re)])];
        let scaled = vec![&h[0] * Complex64::new(alpha, 0.0)];
        let got = nmse(&scaled, &h).unwrap();
        prop_assert!((got - (alpha - 1.0).powi(2)).abs() <= 1e-12 * (1.0 + got));
    }

    #[test]
    fn zf_nulls_interference_when_well_conditioned(seed in 0u64..500) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_channel(&mut rng, 6, 3);
        let sv = h.clone().svd(false, false).singular_values;
        prop_assume!(sv.max() / sv.min() < 1e6);
        let g = zf_combiner(&h).unwrap().transpose() * &h;
        for k in 0..3 {
            for i in 0..3 {
                if i != k {
                    prop_assert!(g[(k, i)].norm() <= 1e-9);
                }
            }
        }
    }
}
