use chanpred_core::channel::{CMatrix, CVector};
use chanpred_core::dataset::{decode, encode};
use chanpred_core::dip::{stack_real, unstack_real};
use chanpred_core::models::{dip_forward, dip_input, init_params, DipSpec};
use chanpred_core::Graph;
use num_complex::Complex64;
use proptest::prelude::*;

fn complex() -> impl Strategy<Value = Complex64> {
    (-10.0f64..10.0, -10.0f64..10.0).prop_map(|(re, im)| Complex64::new(re, im))
}

proptest! {
    #[test]
    fn encode_decode_round_trip(m in 1usize..6, n_o in 1usize..4, values in prop::collection::vec(complex(), 30)) {
        let window: Vec<CVector> = (0..n_o)
            .map(|k| CVector::from_iterator(m, (0..m).map(|i| values[(k * m + i) % values.len()])))
            .collect();
        let v = encode(&window, n_o).unwrap();
        prop_assert_eq!(v.len(), 2 * m * n_o);
        prop_assert_eq!(decode(&v, m).unwrap(), window);
    }

    #[test]
    fn real_stacking_round_trip(m in 1usize..5, n in 1usize..7, values in prop::collection::vec(complex(), 35)) {
        let h = CMatrix::from_fn(m, n, |i, j| values[(i * n + j) % values.len()]);
        prop_assert_eq!(unstack_real(&stack_real(&h)).unwrap(), h);
    }

    #[test]
    fn dip_output_shape(antennas in 1usize..4, depth in 1usize..4, filters in 1usize..5, n1 in 2usize..5, seed in 0u64..100) {
        let spec = DipSpec { antennas, depth, filters, n1, n_iter: 0 };
        let params = init_params(&spec, seed);
        let mut g = Graph::new();
        let vars = params.bind(&mut g);
        let z = g.constant(dip_input(&spec, 0.1, seed));
        let out = dip_forward(&mut g, &spec, &vars, z).unwrap();
        prop_assert_eq!(g.shape(out), &[2 * antennas, n1 << (depth - 1)][..]);
        prop_assert!(g.value(out).is_finite());
    }
}
