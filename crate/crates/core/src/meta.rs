//! MAML meta-training, meta-adaptation and prediction, plus the jointly
//! trained MLP baseline.
//!
//! Meta-training repeats, for `N_epoch · ⌈T_S / V⌉` iterations: take the next
//! batch of `V` shuffled tasks, move each task's copy of the global
//! parameters `Ω` one SGD step (rate `α`) along its support loss, evaluate the
//! query loss at the moved parameters, and apply one ADAM step (rate `β`) to
//! `Ω` against the sum of the query losses.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

#[allow(unused_imports)]
use num_traits::Float;

use crate::autodiff::Graph;
use crate::channel::CVector;
use crate::dataset::{self, SamplePair, TaskDataset};
use crate::error::{Error, Result};
use crate::models::{init_params, ModelParams, Predictor};
use crate::rng;
use crate::tensor::Tensor;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct MetaConfig {
    /// Inner-task (and adaptation) SGD rate `α`.
    pub alpha: f64,
    /// Outer-task ADAM rate `β`.
    pub beta: f64,
    /// Tasks per outer iteration `V`.
    pub batch_size: usize,
    pub n_epoch: usize,
    /// Adaptation gradient steps `T_ad`.
    pub t_ad: usize,
    /// Drop second-order terms of the meta-gradient.
    pub first_order: bool,
    pub seed: u64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        MetaConfig {
            alpha: 1e-1,
            beta: 1e-5,
            batch_size: 64,
            n_epoch: 20,
            t_ad: 10,
            first_order: true,
            seed: 0,
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !(self.beta > 0.0) {
            return Err(Error::Config("meta.alpha and meta.beta must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("meta.batch_size must be at least 1".into()));
        }
        Ok(())
    }

    /// Outer iterations for `tasks` source tasks.
    pub fn iterations(&self, tasks: usize) -> usize {
        self.n_epoch * tasks.div_ceil(self.batch_size.max(1))
    }
}

/// ADAM moments, shaped like the parameters they track.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros: Vec<Tensor> = params.tensors.iter().map(|t| Tensor::zeros(t.shape())).collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    /// One bias-corrected ADAM update of `params` with learning rate `lr`.
    pub fn step(&mut self, params: &mut ModelParams, grads: &[Tensor], lr: f64) -> Result<()> {
        params.check_like(grads)?;
        params.check_like(&self.m)?;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        for ((p, g), (m, v)) in params
            .tensors
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let it = p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
            for ((p, &g), (m, v)) in it {
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
        }
        Ok(())
    }
}

/// Free-function form of [`AdamState::step`].
pub fn adam_step(state: &mut AdamState, params: &mut ModelParams, grads: &[Tensor], lr: f64) -> Result<()> {
    state.step(params, grads, lr)
}

/// Mean squared ℓ2 loss of `params` on `pairs` and its gradient.
pub fn loss_and_grad(model: &impl Predictor, params: &ModelParams, pairs: &[SamplePair]) -> Result<(f64, Vec<Tensor>)> {
    let (x, y) = dataset::batch_tensors(pairs)?;
    let mut g = Graph::new();
    let vars = params.bind(&mut g);
    let x = g.constant(x);
    let y = g.constant(y);
    let pred = model.forward(&mut g, &vars, x)?;
    let loss = g.mse_loss(pred, y)?;
    let value = g.value(loss).item();
    if !value.is_finite() {
        return Err(Error::NonFinite("training loss"));
    }
    Ok((value, g.gradients(loss, &vars)?))
}

/// Mean squared ℓ2 loss of `params` on `pairs`.
pub fn loss(model: &impl Predictor, params: &ModelParams, pairs: &[SamplePair]) -> Result<f64> {
    let (x, y) = dataset::batch_tensors(pairs)?;
    let pred = crate::models::predict_batch(model, params, &x)?;
    let sq: f64 = pred.data().iter().zip(y.data()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sq / pairs.len() as f64)
}

/// Inner-task update `Ω − α ∇ Loss_support(Ω)`.
pub fn inner_update(
    model: &impl Predictor,
    omega: &ModelParams,
    support: &[SamplePair],
    alpha: f64,
) -> Result<ModelParams> {
    if support.is_empty() {
        return Err(Error::Dataset("inner update needs a non-empty support set".into()));
    }
    let (_, grads) = loss_and_grad(model, omega, support)?;
    omega.sgd_step(&grads, alpha)
}

/// One task's contribution to the meta-gradient.
#[derive(Clone, Debug)]
pub struct TaskGradient {
    pub support_loss: f64,
    pub query_loss: f64,
    pub grads: Vec<Tensor>,
}

/// Gradient of `Loss_query(Ω − α ∇ Loss_support(Ω))` with respect to `Ω`.
///
/// With `first_order` the Jacobian of the inner step is replaced by the
/// identity, i.e. the query gradient is taken at the adapted parameters.
pub fn task_meta_gradient(
    model: &impl Predictor,
    omega: &ModelParams,
    task: &TaskDataset,
    alpha: f64,
    first_order: bool,
) -> Result<TaskGradient> {
    if task.support.is_empty() || task.query.is_empty() {
        return Err(Error::Dataset(alloc::format!(
            "task {} has an empty support or query set",
            task.task_id
        )));
    }
    if first_order {
        let (support_loss, g_sup) = loss_and_grad(model, omega, &task.support)?;
        let adapted = omega.sgd_step(&g_sup, alpha)?;
        let (query_loss, grads) = loss_and_grad(model, &adapted, &task.query)?;
        return Ok(TaskGradient {
            support_loss,
            query_loss,
            grads,
        });
    }

    let (xs, ys) = dataset::batch_tensors(&task.support)?;
    let (xq, yq) = dataset::batch_tensors(&task.query)?;
    let mut g = Graph::new();
    let vars = omega.bind(&mut g);
    let xs = g.constant(xs);
    let ys = g.constant(ys);
    let pred = model.forward(&mut g, &vars, xs)?;
    let l_sup = g.mse_loss(pred, ys)?;
    let g_sup = g.grad(l_sup, &vars)?;
    let mut adapted = Vec::with_capacity(vars.len());
    for (&p, &gp) in vars.iter().zip(&g_sup) {
        let step = g.scale(gp, alpha);
        adapted.push(g.sub(p, step)?);
    }
    let xq = g.constant(xq);
    let yq = g.constant(yq);
    let pred = model.forward(&mut g, &adapted, xq)?;
    let l_que = g.mse_loss(pred, yq)?;
    let (support_loss, query_loss) = (g.value(l_sup).item(), g.value(l_que).item());
    if !query_loss.is_finite() {
        return Err(Error::NonFinite("query loss"));
    }
    let grads = g.gradients(l_que, &vars)?;
    Ok(TaskGradient {
        support_loss,
        query_loss,
        grads,
    })
}

/// One row of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub iteration: usize,
    pub support_loss: f64,
    pub query_loss: f64,
}

#[derive(Clone, Debug)]
pub struct Trained {
    pub params: ModelParams,
    pub log: Vec<LogRow>,
}

fn epoch_order(n: usize, seed: u64, label: &str, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, label, epoch as u64));
    order
}

/// Meta-trains from the seeded initialization.
pub fn meta_train(tasks: &[TaskDataset], model: &impl Predictor, cfg: &MetaConfig) -> Result<Trained> {
    meta_train_from(init_params(model, cfg.seed), tasks, model, cfg)
}

/// Meta-trains starting from `omega`.
pub fn meta_train_from(
    mut omega: ModelParams,
    tasks: &[TaskDataset],
    model: &impl Predictor,
    cfg: &MetaConfig,
) -> Result<Trained> {
    cfg.validate()?;
    if tasks.is_empty() {
        return Err(Error::Dataset("meta-training needs at least one source task".into()));
    }
    let mut adam = AdamState::new(&omega);
    let mut log = Vec::with_capacity(cfg.iterations(tasks.len()));
    for epoch in 0..cfg.n_epoch {
        for batch in epoch_order(tasks.len(), cfg.seed, "meta", epoch).chunks(cfg.batch_size) {
            let mut total: Option<Vec<Tensor>> = None;
            let (mut sup, mut que) = (0.0, 0.0);
            // fixed task-index reduction order
            for &t in batch {
                let tg = task_meta_gradient(model, &omega, &tasks[t], cfg.alpha, cfg.first_order)?;
                sup += tg.support_loss;
                que += tg.query_loss;
                total = Some(match total {
                    None => tg.grads,
                    Some(acc) => acc
                        .iter()
                        .zip(&tg.grads)
                        .map(|(a, b)| a.zip_map(b, |x, y| x + y))
                        .collect(),
                });
            }
            let grads = total.expect("batches are non-empty");
            adam.step(&mut omega, &grads, cfg.beta)?;
            let n = batch.len() as f64;
            log.push(LogRow {
                iteration: log.len(),
                support_loss: sup / n,
                query_loss: que / n,
            });
        }
    }
    Ok(Trained { params: omega, log })
}

/// Meta-adaptation: `t_ad` full-batch SGD steps at rate `alpha` from `omega`.
pub fn adapt(
    model: &impl Predictor,
    omega: &ModelParams,
    adapt_set: &[SamplePair],
    alpha: f64,
    t_ad: usize,
) -> Result<ModelParams> {
    if adapt_set.is_empty() {
        return Err(Error::Dataset("adaptation needs a non-empty adaptation set".into()));
    }
    let mut params = omega.clone();
    for _ in 0..t_ad {
        let (_, grads) = loss_and_grad(model, &params, adapt_set)?;
        params = params.sgd_step(&grads, alpha)?;
    }
    Ok(params)
}

/// Predicted channel vectors for each test input.
pub fn predict(model: &impl Predictor, omega_ad: &ModelParams, test: &[SamplePair]) -> Result<Vec<CVector>> {
    if test.is_empty() {
        return Ok(Vec::new());
    }
    let (x, _) = dataset::batch_tensors(test)?;
    let y = crate::models::predict_batch(model, omega_ad, &x)?;
    let (rows, cols) = (y.rows(), y.cols());
    Ok((0..cols)
        .map(|j| {
            let col: Vec<f64> = (0..rows).map(|i| y.get(i, j)).collect();
            dataset::decode_vector(&col)
        })
        .collect())
}

/// Jointly trained baseline: every support and query pair pooled, shuffled
/// each epoch, and fitted with mini-batch ADAM at rate `β`. Each epoch takes
/// `⌈T_S / V⌉` steps on batches of `V · (N_s + N_q)` pairs, matching the
/// number of outer updates of [`meta_train`].
pub fn train_mlp_baseline(tasks: &[TaskDataset], model: &impl Predictor, cfg: &MetaConfig) -> Result<Trained> {
    cfg.validate()?;
    if tasks.is_empty() {
        return Err(Error::Dataset(
            "baseline training needs at least one source task".into(),
        ));
    }
    let pool: Vec<&SamplePair> = tasks.iter().flat_map(|t| t.support.iter().chain(&t.query)).collect();
    let steps_per_epoch = tasks.len().div_ceil(cfg.batch_size);
    let per_step = pool.len().div_ceil(steps_per_epoch);

    let mut params = init_params(model, cfg.seed);
    let mut adam = AdamState::new(&params);
    let mut log = Vec::with_capacity(cfg.iterations(tasks.len()));
    for epoch in 0..cfg.n_epoch {
        let order = epoch_order(pool.len(), cfg.seed, "baseline", epoch);
        for chunk in order.chunks(per_step) {
            let batch: Vec<SamplePair> = chunk.iter().map(|&i| pool[i].clone()).collect();
            let (value, grads) = loss_and_grad(model, &params, &batch)?;
            adam.step(&mut params, &grads, cfg.beta)?;
            log.push(LogRow {
                iteration: log.len(),
                support_loss: value,
                query_loss: value,
            });
        }
    }
    Ok(Trained { params, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Var;
    use crate::models::{Architecture, MlpSpec, ParamKind};
    use alloc::vec;

    /// `y = w · x`, one parameter.
    struct Scalar;

    impl Architecture for Scalar {
        fn param_kinds(&self) -> Vec<ParamKind> {
            vec![ParamKind::Weight { out: 1, inp: 1 }]
        }
    }

    impl Predictor for Scalar {
        fn forward(&self, g: &mut Graph, params: &[Var], inputs: Var) -> Result<Var> {
            g.matmul(params[0], inputs)
        }
    }

    fn pair(x: f64, y: f64, slot: usize) -> SamplePair {
        SamplePair {
            input: vec![x],
            label: vec![y],
            slot_index: slot,
            ue_id: 0,
        }
    }

    fn scalar_params(w: f64) -> ModelParams {
        ModelParams {
            tensors: vec![Tensor::full(&[1, 1], w)],
        }
    }

    #[test]
    fn inner_update_scalar_by_hand() {
        // loss (w·1 − 1)², gradient −2 at w = 0, step 0.1 → 0.2
        let out = inner_update(&Scalar, &scalar_params(0.0), &[pair(1.0, 1.0, 0)], 0.1).unwrap();
        assert!((out.tensors[0].item() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn inner_update_fixed_points() {
        let p = scalar_params(2.0);
        let exact = [pair(1.0, 2.0, 0), pair(3.0, 6.0, 1)];
        assert_eq!(inner_update(&Scalar, &p, &exact, 0.5).unwrap(), p);
        let noisy = [pair(1.0, 5.0, 0)];
        assert_eq!(inner_update(&Scalar, &p, &noisy, 0.0).unwrap(), p);
        assert!(inner_update(&Scalar, &p, &[], 0.1).is_err());
    }

    #[test]
    fn adam_first_step_magnitude() {
        let mut p = scalar_params(0.0);
        let mut s = AdamState::new(&p);
        s.step(&mut p, &[Tensor::full(&[1, 1], 1.0)], 1e-5).unwrap();
        assert!((p.tensors[0].item() + 1e-5).abs() < 1e-12);
        assert_eq!(s.step, 1);

        let mut q = scalar_params(0.3);
        let mut s = AdamState::new(&q);
        s.step(&mut q, &[Tensor::zeros(&[1, 1])], 1e-3).unwrap();
        assert_eq!(q.tensors[0].item(), 0.3);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn adam_rejects_shape_mismatch() {
        let mut p = scalar_params(0.0);
        let mut s = AdamState::new(&p);
        assert!(s.step(&mut p, &[Tensor::zeros(&[2, 1])], 1e-3).is_err());
    }

    #[test]
    fn adapt_zero_steps_is_identity() {
        let spec = MlpSpec::for_channel(1, 1, 1, 3);
        let p = init_params(&spec, 1);
        let set = [SamplePair {
            input: vec![0.1, 0.2],
            label: vec![0.3, 0.4],
            slot_index: 1,
            ue_id: 0,
        }];
        assert_eq!(adapt(&spec, &p, &set, 0.1, 0).unwrap(), p);
        assert!(adapt(&spec, &p, &[], 0.1, 3).is_err());
    }

    #[test]
    fn adaptation_loss_is_monotone_for_small_rate() {
        // quadratic in w with curvature 2·mean(x²); rate below 1/curvature
        let set = [pair(1.0, 2.0, 0), pair(-0.5, -0.7, 1), pair(2.0, 3.5, 2)];
        let mut p = scalar_params(-1.0);
        let mut last = loss(&Scalar, &p, &set).unwrap();
        for _ in 0..20 {
            p = adapt(&Scalar, &p, &set, 0.05, 1).unwrap();
            let now = loss(&Scalar, &p, &set).unwrap();
            assert!(now <= last);
            last = now;
        }
    }

    #[test]
    fn zero_epochs_returns_init() {
        let spec = MlpSpec::for_channel(1, 1, 1, 3);
        let cfg = MetaConfig {
            n_epoch: 0,
            ..MetaConfig::default()
        };
        let task = TaskDataset {
            task_id: 0,
            ue_id: 0,
            support: vec![SamplePair {
                input: vec![0.1, 0.2],
                label: vec![0.3, 0.4],
                slot_index: 1,
                ue_id: 0,
            }],
            query: vec![SamplePair {
                input: vec![0.2, 0.2],
                label: vec![0.1, 0.4],
                slot_index: 2,
                ue_id: 0,
            }],
        };
        let out = meta_train(core::slice::from_ref(&task), &spec, &cfg).unwrap();
        assert_eq!(out.params, init_params(&spec, cfg.seed));
        let base = train_mlp_baseline(&[task], &spec, &cfg).unwrap();
        assert_eq!(base.params, init_params(&spec, cfg.seed));
        assert!(meta_train(&[], &spec, &cfg).is_err());
    }

    #[test]
    fn reference_iteration_count() {
        let cfg = MetaConfig::default();
        assert_eq!(cfg.iterations(4096), 1280);
    }

    #[test]
    fn zero_params_predict_zero() {
        let spec = MlpSpec::for_channel(2, 1, 1, 3);
        let mut p = init_params(&spec, 0);
        for t in &mut p.tensors {
            t.data_mut().fill(0.0);
        }
        let test = [SamplePair {
            input: vec![1.0; 4],
            label: vec![1.0; 4],
            slot_index: 1,
            ue_id: 0,
        }];
        let out = predict(&spec, &p, &test).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].iter().all(|c| c.norm() == 0.0));
    }
}
