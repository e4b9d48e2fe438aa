use chanpred_core::dataset::{SamplePair, TaskDataset};
use chanpred_core::meta::{inner_update, loss, task_meta_gradient};
use chanpred_core::models::{dip_forward, dip_input, init_params, DipSpec, MlpSpec, ModelParams, Predictor};
use chanpred_core::{grad_check_many, Graph, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::matrix(rows, cols, data).unwrap()
}

#[test]
fn three_layer_mlp_matches_central_differences() {
    let spec = MlpSpec {
        input_dim: 5,
        hidden_layers: 2,
        hidden_width: 7,
        output_dim: 3,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = random_matrix(&mut rng, 5, 4);
    let y = random_matrix(&mut rng, 3, 4);
    let params = init_params(&spec, 5);
    let err = grad_check_many(
        |g, vars| {
            let xv = g.constant(x.clone());
            let yv = g.constant(y.clone());
            let out = spec.forward(g, vars, xv)?;
            g.mse_loss(out, yv)
        },
        &params.tensors,
        1e-6,
    )
    .unwrap();
    assert!(err <= 1e-5, "relative error {err}");
}

#[test]
fn two_layer_dip_block_matches_central_differences() {
    let spec = DipSpec {
        antennas: 2,
        depth: 2,
        filters: 3,
        n1: 3,
        n_iter: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let z1 = dip_input(&spec, 1.0, 9);
    let target = random_matrix(&mut rng, 4, spec.output_len());
    let mut params = init_params(&spec, 2);
    // move batch-norm scale/shift off their defaults so every path matters
    for t in params.tensors.iter_mut() {
        for v in t.data_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    let err = grad_check_many(
        |g, vars| {
            let z = g.constant(z1.clone());
            let y = g.constant(target.clone());
            let out = dip_forward(g, &spec, vars, z)?;
            g.sq_error(out, y)
        },
        &params.tensors,
        1e-6,
    )
    .unwrap();
    assert!(err <= 1e-5, "relative error {err}");
}

#[test]
fn dip_gradient_with_respect_to_input_is_checked_too() {
    let spec = DipSpec {
        antennas: 1,
        depth: 2,
        filters: 2,
        n1: 4,
        n_iter: 0,
    };
    let params = init_params(&spec, 4);
    let z1 = dip_input(&spec, 1.0, 1);
    let mut inputs = params.tensors.clone();
    inputs.push(z1);
    let n = params.len();
    let err = grad_check_many(
        |g, vars| {
            let out = dip_forward(g, &spec, &vars[..n], vars[n])?;
            let sq = g.mul(out, out)?;
            Ok(g.sum(sq))
        },
        &inputs,
        1e-6,
    )
    .unwrap();
    assert!(err <= 1e-5, "relative error {err}");
}

fn tiny_task(rng: &mut ChaCha8Rng) -> TaskDataset {
    let mut pair = |slot| SamplePair {
        input: (0..2).map(|_| rng.random_range(-1.0..1.0)).collect(),
        label: vec![rng.random_range(-1.0..1.0)],
        slot_index: slot,
        ue_id: 0,
    };
    TaskDataset {
        task_id: 0,
        ue_id: 0,
        support: (0..4).map(&mut pair).collect(),
        query: (4..8).map(&mut pair).collect(),
    }
}

/// `Ω ↦ Loss_query(Ω − α ∇ Loss_support(Ω))`, evaluated with plain forward passes.
fn post_step_query_loss(spec: &MlpSpec, omega: &ModelParams, task: &TaskDataset, alpha: f64) -> f64 {
    let adapted = inner_update(spec, omega, &task.support, alpha).unwrap();
    loss(spec, &adapted, &task.query).unwrap()
}

#[test]
fn second_order_meta_gradient_matches_finite_differences() {
    let spec = MlpSpec {
        input_dim: 2,
        hidden_layers: 1,
        hidden_width: 3,
        output_dim: 1,
    };
    let omega = init_params(&spec, 8);
    assert!(omega.scalar_count() <= 20);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let task = tiny_task(&mut rng);
    let alpha = 0.3;

    let tg = task_meta_gradient(&spec, &omega, &task, alpha, false).unwrap();
    let step = 1e-5;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    let mut probe = omega.clone();
    for t in 0..probe.len() {
        for i in 0..probe.tensors[t].len() {
            let orig = probe.tensors[t].data()[i];
            probe.tensors[t].data_mut()[i] = orig + step;
            let plus = post_step_query_loss(&spec, &probe, &task, alpha);
            probe.tensors[t].data_mut()[i] = orig - step;
            let minus = post_step_query_loss(&spec, &probe, &task, alpha);
            probe.tensors[t].data_mut()[i] = orig;
            let fd = (plus - minus) / (2.0 * step);
            worst = worst.max((tg.grads[t].data()[i] - fd).abs());
            scale = scale.max(fd.abs());
        }
    }
    assert!(scale > 1e-3, "degenerate probe");
    assert!(worst / scale <= 1e-4, "relative error {}", worst / scale);

    // the first-order approximation drops a visible term on this task
    let fo = task_meta_gradient(&spec, &omega, &task, alpha, true).unwrap();
    let diff: f64 = fo
        .grads
        .iter()
        .zip(&tg.grads)
        .flat_map(|(a, b)| a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    assert!(diff > 1e-4 * scale);
}

#[test]
fn graph_gradient_of_gradient_matches_finite_differences() {
    // d/dx of d/dx (x^2 · y) = 2y
    let mut g = Graph::new();
    let x = g.param(Tensor::scalar(1.5));
    let y = g.param(Tensor::scalar(-0.7));
    let x2 = g.mul(x, x).unwrap();
    let f = g.mul(x2, y).unwrap();
    let dfdx = g.grad(f, &[x]).unwrap()[0];
    let d2 = g.gradients(dfdx, &[x, y]).unwrap();
    assert!((d2[0].item() - 2.0 * -0.7).abs() < 1e-12);
    assert!((d2[1].item() - 2.0 * 1.5).abs() < 1e-12);
}
