//! Experiment orchestration: simulate, optionally denoise, train every
//! method on the source UEs, then adapt and evaluate on the target UEs.

use std::collections::BTreeMap;

use chanpred_core::channel::{simulate, CMatrix, CVector, ChannelTrace, LsTrace};
use chanpred_core::dataset::{self, build_source_tasks, build_target_set, decode_vector, TargetSet, TaskDataset};
use chanpred_core::dip::{denoise_trace, DipRun};
use chanpred_core::eval::{self, flops_dip, flops_maml, EvalReport, FlopsReport, MamlCost};
use chanpred_core::meta::{self, Trained};
use chanpred_core::models::MlpSpec;
use chanpred_core::rng::derive_seed;

use crate::config::{ExperimentConfig, Method};
use crate::error::{Error, Result};

/// Everything produced before target adaptation, for one master seed.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub seed: u64,
    pub truth: Vec<ChannelTrace>,
    pub ls: Vec<LsTrace>,
    /// Denoised copies of `ls`, when DIP is enabled.
    pub denoised: Option<Vec<LsTrace>>,
    pub dip_runs: Vec<DipRun>,
    /// Source-trained parameters per learned method.
    pub models: BTreeMap<Method, Trained>,
}

impl Prepared {
    fn traces(&self, dip: bool) -> &[LsTrace] {
        match (&self.denoised, dip) {
            (Some(d), true) => d,
            _ => &self.ls,
        }
    }
}

/// Seed handed to the dataset builders.
pub fn data_seed(seed: u64, target: bool) -> u64 {
    derive_seed(seed, "data", target as u64)
}

/// Seed of parameter initialization and task shuffling, shared by all methods.
pub fn meta_seed(seed: u64) -> u64 {
    derive_seed(seed, "meta", 0)
}

pub fn dip_seed(seed: u64, ue_id: u32) -> u64 {
    derive_seed(seed, "dip", ue_id as u64)
}

/// Simulates all UEs, denoises when needed and trains the requested methods.
pub fn prepare(
    cfg: &ExperimentConfig,
    seed: u64,
    methods: &[Method],
    mut progress: impl FnMut(&str),
) -> Result<Prepared> {
    let dip = methods.iter().any(|m| m.uses_dip());
    let mut prepared = prepare_data(cfg, seed, dip, &mut progress)?;
    train(cfg, &mut prepared, methods, progress)?;
    Ok(prepared)
}

/// Simulates all UEs and, with `dip`, denoises every LS trace.
pub fn prepare_data(cfg: &ExperimentConfig, seed: u64, dip: bool, mut progress: impl FnMut(&str)) -> Result<Prepared> {
    let d = &cfg.dataset;
    let sim = cfg.sim_config(seed);
    let all = (d.source_ues + d.target_ues) as u32;
    let (truth, ls): (Vec<_>, Vec<_>) = simulate(&sim, 0..all)?.into_iter().unzip();

    let mut dip_runs = Vec::new();
    let denoised = if dip {
        if !cfg.dip.enabled {
            return Err(Error::Config("DIP methods requested but dip.enabled = false".into()));
        }
        let dip_cfg = cfg.dip_config();
        let mut out = Vec::with_capacity(ls.len());
        for trace in &ls {
            progress(&format!("seed {seed}: denoising UE {}", trace.ue_id));
            let (den, run) = denoise_trace(trace, &dip_cfg, dip_seed(seed, trace.ue_id))?;
            out.push(den);
            dip_runs.push(run);
        }
        Some(out)
    } else {
        None
    };
    Ok(Prepared {
        seed,
        truth,
        ls,
        denoised,
        dip_runs,
        models: BTreeMap::new(),
    })
}

/// Trains every learned method in `methods` on the source UEs.
pub fn train(
    cfg: &ExperimentConfig,
    prepared: &mut Prepared,
    methods: &[Method],
    mut progress: impl FnMut(&str),
) -> Result<()> {
    let spec = cfg.mlp_spec();
    let meta_cfg = cfg.meta_config(meta_seed(prepared.seed));
    for &method in methods {
        if method == Method::Persistence {
            continue;
        }
        progress(&format!("seed {}: training {method}", prepared.seed));
        let tasks = source_tasks(cfg, prepared, method.uses_dip())?;
        let trained = if method.is_meta() {
            meta::meta_train(&tasks, &spec, &meta_cfg)?
        } else {
            meta::train_mlp_baseline(&tasks, &spec, &meta_cfg)?
        };
        prepared.models.insert(method, trained);
    }
    Ok(())
}

/// Source tasks built from the raw or denoised source traces.
pub fn source_tasks(cfg: &ExperimentConfig, prepared: &Prepared, dip: bool) -> Result<Vec<TaskDataset>> {
    let d = &cfg.dataset;
    let source = &prepared.traces(dip)[..d.source_ues];
    Ok(build_source_tasks(
        source,
        d.tasks_per_ue,
        d.n_s,
        d.n_q,
        d.n_o,
        data_seed(prepared.seed, false),
    )?)
}

/// Adaptation and test sets of every target UE.
pub fn target_sets(cfg: &ExperimentConfig, prepared: &Prepared, dip: bool) -> Result<Vec<TargetSet>> {
    let d = &cfg.dataset;
    let traces = prepared.traces(dip);
    (d.source_ues..d.source_ues + d.target_ues)
        .map(|i| {
            Ok(build_target_set(
                &traces[i],
                &prepared.truth[i],
                d.n_ad,
                d.n_te,
                d.n_o,
                data_seed(prepared.seed, true),
            )?)
        })
        .collect()
}

/// Most recent input slot of each test window.
pub fn persistence(test: &[dataset::SamplePair]) -> Vec<CVector> {
    test.iter()
        .map(|p| {
            let m2 = p.label.len();
            decode_vector(&p.input[p.input.len() - m2..])
        })
        .collect()
}

pub fn flops_for(cfg: &ExperimentConfig, method: Method) -> FlopsReport {
    if method == Method::Persistence {
        return FlopsReport::default();
    }
    let d = &cfg.dataset;
    let spec: MlpSpec = cfg.mlp_spec();
    let mut report = flops_maml(&MamlCost {
        n_epoch: cfg.meta.n_epoch as u64,
        tasks: (d.tasks_per_ue * d.source_ues) as u64,
        pairs_per_task: (d.n_s + d.n_q) as u64,
        t_ad: cfg.meta.t_ad as u64,
        n_ad: d.n_ad as u64,
        n_te: d.n_te as u64,
        n_o: d.n_o as u64,
        hidden_layers: spec.hidden_layers as u64,
        hidden_width: spec.hidden_width as u64,
        antennas: cfg.sim.antennas as u64,
    });
    if method.uses_dip() {
        report.dip = dip_flops_per_trace(cfg) * (d.source_ues + d.target_ues) as u128;
    }
    report
}

/// DIP cost of denoising one trace, on the padded time length.
pub fn dip_flops_per_trace(cfg: &ExperimentConfig) -> u128 {
    let n_t = match cfg.dip_config().spec_for(cfg.sim.antennas, cfg.sim.slots) {
        Ok((spec, _)) => spec.output_len(),
        Err(_) => cfg.sim.slots,
    };
    flops_dip(
        cfg.dip.n_iter as u64,
        n_t as u64,
        cfg.dip.filters as u64,
        cfg.sim.antennas as u64,
    )
}

/// Test predictions of one method for every target UE, with the true labels.
pub fn predictions(
    cfg: &ExperimentConfig,
    prepared: &Prepared,
    method: Method,
) -> Result<Vec<(Vec<CVector>, Vec<CVector>)>> {
    let spec = cfg.mlp_spec();
    let sets = target_sets(cfg, prepared, method.uses_dip())?;
    sets.iter()
        .map(|set| {
            let truth: Vec<CVector> = set.test.iter().map(|p| decode_vector(&p.label)).collect();
            let pred = match method {
                Method::Persistence => persistence(&set.test),
                _ => {
                    let trained = prepared
                        .models
                        .get(&method)
                        .ok_or_else(|| Error::Config(format!("method {method} was not trained")))?;
                    let adapted = meta::adapt(&spec, &trained.params, &set.adapt, cfg.meta.alpha, cfg.meta.t_ad)?;
                    meta::predict(&spec, &adapted, &set.test)?
                }
            };
            Ok((pred, truth))
        })
        .collect()
}

/// NMSE averaged over target UEs and ZF rates averaged over test slots.
pub fn evaluate_method(cfg: &ExperimentConfig, prepared: &Prepared, method: Method) -> Result<EvalReport> {
    let per_ue = predictions(cfg, prepared, method)?;
    let mut nmse = 0.0;
    for (pred, truth) in &per_ue {
        nmse += eval::nmse(pred, truth)?;
    }
    nmse /= per_ue.len() as f64;

    let k = per_ue.len();
    let m = cfg.sim.antennas;
    let slots = cfg.dataset.n_te;
    let mut rates = vec![0.0; k];
    for j in 0..slots {
        let h_true = CMatrix::from_fn(m, k, |a, u| per_ue[u].1[j][a]);
        let h_hat = CMatrix::from_fn(m, k, |a, u| per_ue[u].0[j][a]);
        let r = eval::sum_rate(&h_true, &h_hat, cfg.sim.snr_db)?;
        for (acc, v) in rates.iter_mut().zip(&r.per_ue) {
            *acc += v / slots as f64;
        }
    }
    let mut report = EvalReport::new(
        prepared.seed,
        cfg.sim.snr_db,
        cfg.dataset.n_ad,
        cfg.meta.t_ad,
        method.name(),
        nmse,
        rates,
        flops_for(cfg, method),
    );
    report.config_echo = cfg.hash();
    Ok(report)
}

/// One row of a sweep: the report and the sweep value it belongs to.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub value: Option<f64>,
    pub report: EvalReport,
}

/// Runs every sweep point and seed; rows come back ordered by
/// (sweep value, seed, method).
pub fn run_sweep(cfg: &ExperimentConfig, mut progress: impl FnMut(&str)) -> Result<Vec<Row>> {
    cfg.validate()?;
    let methods = &cfg.sweep.methods;
    let points = cfg.points()?;
    let shared = cfg.sweep.variable.is_some_and(|v| v.adaptation_only());
    let mut rows = Vec::new();
    for &seed in &cfg.sweep.seeds {
        let base = if shared {
            Some(prepare(cfg, seed, methods, &mut progress)?)
        } else {
            None
        };
        for (value, point) in &points {
            let owned;
            let prepared = match &base {
                Some(p) => p,
                None => {
                    owned = prepare(point, seed, methods, &mut progress)?;
                    &owned
                }
            };
            for &method in methods {
                let report = evaluate_method(point, prepared, method).map_err(|e| {
                    let at = value
                        .map(|v| format!(" at {} = {v}", cfg.sweep.variable.unwrap()))
                        .unwrap_or_default();
                    e.context(format!("evaluating {method} for seed {seed}{at}"))
                })?;
                rows.push(Row { value: *value, report });
            }
        }
    }
    sort_rows(&mut rows, methods);
    Ok(rows)
}

/// Deterministic merge order: sweep value, then seed, then configured method order.
pub fn sort_rows(rows: &mut [Row], methods: &[Method]) {
    let rank = |name: &str| methods.iter().position(|m| m.name() == name).unwrap_or(usize::MAX);
    rows.sort_by(|a, b| {
        a.value
            .unwrap_or(0.0)
            .total_cmp(&b.value.unwrap_or(0.0))
            .then(a.report.seed.cmp(&b.report.seed))
            .then(rank(&a.report.method).cmp(&rank(&b.report.method)))
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::desk();
        cfg.sim.antennas = 4;
        cfg.sim.slots = 64;
        cfg.dataset.tasks_per_ue = 4;
        cfg.dataset.source_ues = 2;
        cfg.dataset.target_ues = 2;
        cfg.dataset.n_ad = 5;
        cfg.dataset.n_te = 10;
        cfg.mlp.hidden_width = 8;
        cfg.mlp.hidden_layers = 2;
        cfg.meta.n_epoch = 1;
        cfg.meta.batch_size = 4;
        cfg.dip.n_iter = 3;
        cfg.dip.filters = 4;
        cfg
    }

    #[test]
    fn single_point_gives_one_row_per_method() {
        let cfg = tiny();
        let rows = run_sweep(&cfg, |_| {}).unwrap();
        assert_eq!(rows.len(), Method::ALL.len());
        let names: Vec<&str> = rows.iter().map(|r| r.report.method.as_str()).collect();
        assert_eq!(names, ["mlp", "maml", "mlp-dip", "maml-dip", "persistence"]);
        for r in &rows {
            assert!(r.report.nmse_linear.is_finite() && r.report.nmse_linear > 0.0);
            assert!(r.report.sum_rate_bits >= 0.0);
            assert_eq!(r.report.config_echo, cfg.hash());
        }
    }

    #[test]
    fn adaptation_sweep_reuses_training() {
        let mut cfg = tiny();
        cfg.sweep.methods = vec![Method::Maml, Method::Persistence];
        cfg.sweep.variable = Some(crate::config::SweepVar::TAd);
        cfg.sweep.values = vec![0.0, 4.0];
        cfg.sweep.seeds = vec![1, 0];
        let rows = run_sweep(&cfg, |_| {}).unwrap();
        assert_eq!(rows.len(), 8);
        assert_eq!(rows[0].report.seed, 0);
        assert_eq!(rows[0].report.t_ad, 0);
        assert_eq!(rows[7].report.t_ad, 4);
        // persistence does not depend on T_ad
        assert_eq!(rows[1].report.nmse_linear, rows[5].report.nmse_linear);
    }

    #[test]
    fn target_ues_share_test_slots() {
        let cfg = tiny();
        let prepared = prepare(&cfg, 3, &[Method::Persistence], |_| {}).unwrap();
        let sets = target_sets(&cfg, &prepared, false).unwrap();
        let slots = |s: &TargetSet| s.test.iter().map(|p| p.slot_index).collect::<Vec<_>>();
        assert_eq!(slots(&sets[0]), slots(&sets[1]));
    }

    #[test]
    fn dip_flops_are_reported_separately() {
        let cfg = ExperimentConfig::desk();
        let plain = flops_for(&cfg, Method::Maml);
        let dip = flops_for(&cfg, Method::MamlDip);
        assert_eq!(plain.total, dip.total);
        assert_eq!(plain.dip, 0);
        assert!(dip.dip > 0);
        assert_eq!(flops_for(&cfg, Method::Persistence), FlopsReport::default());
    }
}
