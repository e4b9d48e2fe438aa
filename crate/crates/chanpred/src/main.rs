use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chanpred::config::{ExperimentConfig, Method};
use chanpred::core::dip::denoise_trace;
use chanpred::core::eval::{flops_maml, MamlCost};
use chanpred::core::meta;
use chanpred::core::models::Architecture;
use chanpred::experiment::{self, Row};
use chanpred::formats::{self, StoredTrace, TraceKind};
use chanpred::report::{self, RunManifest};
use chanpred::{Error, Result};

#[derive(Parser)]
#[command(
    name = "chanpred",
    version,
    about = "Meta-learned MIMO channel prediction experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration; defaults to the desk preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in preset used when --config is absent (desk or full).
    #[arg(long, default_value = "desk")]
    preset: String,
    /// Master seed; overrides the configured seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::preset(&self.preset)?,
        };
        if let Some(seed) = self.seed {
            cfg.sweep.seeds = vec![seed];
        }
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn seed(&self, cfg: &ExperimentConfig) -> u64 {
        self.seed.unwrap_or(cfg.sweep.seeds[0])
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate true and LS traces for all source and target UEs.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Denoise every trace of an LS trace file with DIP.
    Denoise {
        #[command(flatten)]
        common: Common,
        /// Trace file written by `simulate` (its LS traces are used).
        #[arg(long)]
        input: PathBuf,
    },
    /// Train one method on the source UEs and save a checkpoint.
    MetaTrain {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "maml")]
        method: Method,
    },
    /// Adapt a checkpoint to each target UE and save the adapted checkpoints.
    Adapt {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "maml")]
        method: Method,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Evaluate methods at the configured point and write results.csv.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Restrict to one method.
        #[arg(long, value_enum)]
        method: Option<Method>,
    },
    /// Run the configured sweep over all seeds and write results.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        method: Option<Method>,
    },
    /// Print the operation counts of the configured predictor and denoiser.
    Flops {
        #[command(flatten)]
        common: Common,
    },
}

fn note(msg: &str) {
    eprintln!("{msg}");
}

fn methods(cfg: &mut ExperimentConfig, method: Option<Method>) {
    if let Some(m) = method {
        cfg.sweep.methods = vec![m];
    }
}

fn simulate(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let seed = common.seed(&cfg);
    let prepared = experiment::prepare_data(&cfg, seed, false, note)?;
    let dir = &cfg.output.dir;
    let truth: Vec<StoredTrace> = prepared.truth.iter().map(StoredTrace::from).collect();
    let ls: Vec<StoredTrace> = prepared.ls.iter().map(StoredTrace::from).collect();
    formats::write_traces(&dir.join("truth.mch"), &truth)?;
    formats::write_traces(&dir.join("ls.mch"), &ls)?;
    let d = &cfg.dataset;
    let tasks = experiment::source_tasks(&cfg, &prepared, false)?;
    formats::write_dataset(&dir.join("source.mcd"), &prepared.ls[..d.source_ues], &tasks, d.n_o)?;
    note(&format!(
        "wrote {} traces and {} source tasks to {}",
        truth.len(),
        tasks.len(),
        dir.display()
    ));
    Ok(())
}

fn denoise(common: &Common, input: &Path) -> Result<()> {
    let cfg = common.load()?;
    let seed = common.seed(&cfg);
    let traces = formats::read_traces(input)?;
    let dip_cfg = cfg.dip_config();
    let mut out = Vec::new();
    for t in traces.iter().filter(|t| t.kind == TraceKind::Ls) {
        note(&format!("denoising UE {}", t.ue_id));
        let (den, run) = denoise_trace(&t.to_ls(), &dip_cfg, experiment::dip_seed(seed, t.ue_id))?;
        report::emit_loss_history(
            &run.loss_history,
            &cfg.output.dir.join(format!("dip_loss_ue{}.csv", t.ue_id)),
        )?;
        out.push(StoredTrace::from(&den));
    }
    if out.is_empty() {
        return Err(Error::Core(chanpred::core::Error::Dataset(format!(
            "{} holds no LS traces",
            input.display()
        ))));
    }
    formats::write_traces(&cfg.output.dir.join("denoised.mch"), &out)
}

fn checkpoint_path(dir: &Path, method: Method) -> PathBuf {
    dir.join(format!("{method}.mpr"))
}

fn meta_train(common: &Common, method: Method) -> Result<()> {
    if method == Method::Persistence {
        return Err(Error::Config("persistence has nothing to train".into()));
    }
    let cfg = common.load()?;
    let seed = common.seed(&cfg);
    let prepared = experiment::prepare(&cfg, seed, &[method], note)?;
    let trained = &prepared.models[&method];
    let dir = &cfg.output.dir;
    formats::save_checkpoint(&checkpoint_path(dir, method), &cfg.mlp_spec(), &trained.params)?;
    report::emit_training_log(&trained.log, &dir.join(format!("{method}_train_log.csv")))?;
    note(&format!("saved {}", checkpoint_path(dir, method).display()));
    Ok(())
}

fn adapt(common: &Common, method: Method, checkpoint: &Path) -> Result<()> {
    let cfg = common.load()?;
    let seed = common.seed(&cfg);
    let spec = cfg.mlp_spec();
    let params = formats::load_checkpoint(checkpoint, &spec)?;
    let prepared = experiment::prepare_data(&cfg, seed, method.uses_dip(), note)?;
    for set in experiment::target_sets(&cfg, &prepared, method.uses_dip())? {
        let adapted = meta::adapt(&spec, &params, &set.adapt, cfg.meta.alpha, cfg.meta.t_ad)?;
        let path = cfg.output.dir.join(format!("{method}_ue{}.mpr", set.ue_id));
        formats::save_checkpoint(&path, &spec, &adapted)?;
        note(&format!("saved {}", path.display()));
    }
    Ok(())
}

fn sweep(common: &Common, method: Option<Method>) -> Result<()> {
    let mut cfg = common.load()?;
    methods(&mut cfg, method);
    let rows: Vec<Row> = experiment::run_sweep(&cfg, note)?;
    let dir = cfg.output.dir.clone();
    let csv = dir.join("results.csv");
    report::emit_csv(&rows, &csv)?;
    let mut manifest = RunManifest::new(cfg.hash(), cfg.sweep.seeds.clone());
    manifest.artifacts.push(csv.clone());
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let cfg_path = dir.join("config.toml");
    std::fs::write(&cfg_path, cfg.to_toml()).map_err(|e| Error::io(&cfg_path, e))?;
    manifest.artifacts.push(cfg_path);
    manifest.write(&dir.join("manifest.toml"))?;
    print!("{}", report::render_csv(&rows));
    Ok(())
}

fn flops(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let d = &cfg.dataset;
    let spec = cfg.mlp_spec();
    let r = flops_maml(&MamlCost {
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
    let dip = experiment::dip_flops_per_trace(&cfg);
    println!("mlp_parameters,{}", spec.param_count());
    println!("maml_train,{}", r.train);
    println!("maml_adapt,{}", r.adapt);
    println!("maml_test,{}", r.test);
    println!("maml_total,{}", r.total);
    println!("dip_per_trace,{dip}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common } => simulate(&common),
        Command::Denoise { common, input } => denoise(&common, &input),
        Command::MetaTrain { common, method } => meta_train(&common, method),
        Command::Adapt {
            common,
            method,
            checkpoint,
        } => adapt(&common, method, &checkpoint),
        Command::Evaluate { common, method } => {
            let mut common = common;
            if common.seed.is_none() {
                common.seed = Some(common.load()?.sweep.seeds[0]);
            }
            sweep_single_point(&common, method)
        }
        Command::Sweep { common, method } => sweep(&common, method),
        Command::Flops { common } => flops(&common),
    }
}

fn sweep_single_point(common: &Common, method: Option<Method>) -> Result<()> {
    let mut cfg = common.load()?;
    cfg.sweep.variable = None;
    cfg.sweep.values.clear();
    methods(&mut cfg, method);
    let rows = experiment::run_sweep(&cfg, note)?;
    report::emit_csv(&rows, &cfg.output.dir.join("results.csv"))?;
    print!("{}", report::render_csv(&rows));
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
