//! Experiment configuration, read from TOML.
//!
//! Every section rejects unknown keys so a typo in a hyperparameter fails
//! loudly instead of silently falling back to a default.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use chanpred_core::channel::SimConfig;
use chanpred_core::dip::DipConfig;
use chanpred_core::meta::MetaConfig;
use chanpred_core::models::MlpSpec;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub antennas: usize,
    pub slots: usize,
    pub snr_db: f64,
    pub carrier_hz: f64,
    pub speed_kmh: f64,
    pub slot_s: f64,
    pub paths: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaSection {
    pub alpha: f64,
    pub beta: f64,
    pub batch_size: usize,
    pub n_epoch: usize,
    pub t_ad: usize,
    pub first_order: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSection {
    pub hidden_layers: usize,
    pub hidden_width: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DipSection {
    pub enabled: bool,
    pub depth: usize,
    pub filters: usize,
    pub n_iter: usize,
    pub lr: f64,
    pub z_std: f64,
    pub auto_pad: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub tasks_per_ue: usize,
    pub n_s: usize,
    pub n_q: usize,
    pub n_ad: usize,
    pub n_te: usize,
    pub n_o: usize,
    pub source_ues: usize,
    pub target_ues: usize,
}

/// Variables a sweep may vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    SnrDb,
    NAd,
    TAd,
    NO,
    TasksPerUe,
    SpeedKmh,
}

impl SweepVar {
    /// Whether changing this variable leaves the trained models untouched.
    pub fn adaptation_only(self) -> bool {
        matches!(self, SweepVar::NAd | SweepVar::TAd)
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SweepVar::SnrDb => "snr_db",
            SweepVar::NAd => "n_ad",
            SweepVar::TAd => "t_ad",
            SweepVar::NO => "n_o",
            SweepVar::TasksPerUe => "tasks_per_ue",
            SweepVar::SpeedKmh => "speed_kmh",
        };
        f.write_str(s)
    }
}

/// Prediction methods of an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Mlp,
    Maml,
    MlpDip,
    MamlDip,
    /// Last LS estimate as the prediction.
    Persistence,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Mlp,
        Method::Maml,
        Method::MlpDip,
        Method::MamlDip,
        Method::Persistence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Mlp => "mlp",
            Method::Maml => "maml",
            Method::MlpDip => "mlp-dip",
            Method::MamlDip => "maml-dip",
            Method::Persistence => "persistence",
        }
    }

    pub fn uses_dip(self) -> bool {
        matches!(self, Method::MlpDip | Method::MamlDip)
    }

    pub fn is_meta(self) -> bool {
        matches!(self, Method::Maml | Method::MamlDip)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Swept variable; absent for a single-point run.
    #[serde(default)]
    pub variable: Option<SweepVar>,
    #[serde(default)]
    pub values: Vec<f64>,
    /// Master seeds; each is one Monte-Carlo realization.
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sim: SimSection,
    pub meta: MetaSection,
    pub mlp: MlpSection,
    pub dip: DipSection,
    pub dataset: DatasetSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

impl ExperimentConfig {
    /// Small-scale defaults that run on one core in minutes.
    pub fn desk() -> Self {
        ExperimentConfig {
            sim: SimSection {
                antennas: 16,
                slots: 256,
                snr_db: 20.0,
                carrier_hz: 2.3e9,
                speed_kmh: 3.0,
                slot_s: 0.04,
                paths: 20,
            },
            meta: MetaSection {
                alpha: 1e-2,
                beta: 3e-3,
                batch_size: 4,
                n_epoch: 5,
                t_ad: 10,
                first_order: false,
            },
            mlp: MlpSection {
                hidden_layers: 2,
                hidden_width: 128,
            },
            dip: DipSection {
                enabled: true,
                depth: 4,
                filters: 64,
                n_iter: 300,
                lr: 1e-3,
                z_std: 0.1,
                auto_pad: true,
            },
            dataset: DatasetSection {
                tasks_per_ue: 128,
                n_s: 10,
                n_q: 10,
                n_ad: 20,
                n_te: 100,
                n_o: 3,
                source_ues: 8,
                target_ues: 4,
            },
            sweep: SweepSection {
                variable: None,
                values: Vec::new(),
                seeds: vec![0],
                methods: Method::ALL.to_vec(),
            },
            output: OutputSection { dir: "out".into() },
        }
    }

    /// The full-size reference system.
    pub fn full() -> Self {
        let mut cfg = Self::desk();
        cfg.sim.antennas = 64;
        cfg.meta = MetaSection {
            alpha: 1e-1,
            beta: 1e-5,
            batch_size: 64,
            n_epoch: 20,
            t_ad: 10,
            first_order: true,
        };
        cfg.mlp = MlpSection {
            hidden_layers: 4,
            hidden_width: 512,
        };
        cfg.dip.n_iter = 2000;
        cfg.dip.lr = 1e-2;
        cfg.dataset.tasks_per_ue = 1024;
        cfg.dataset.source_ues = 4;
        cfg
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "full" => Ok(Self::full()),
            other => Err(Error::Config(format!(
                "unknown preset {other:?}; expected desk or full"
            ))),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| e.context(format!("config {}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    /// SHA-256 of the experiment parameters; the output directory is left out.
    pub fn hash(&self) -> String {
        let mut cfg = self.clone();
        cfg.output.dir = PathBuf::new();
        let digest = Sha256::digest(cfg.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn sim_config(&self, seed: u64) -> SimConfig {
        SimConfig {
            antennas: self.sim.antennas,
            ues: self.dataset.source_ues + self.dataset.target_ues,
            slots: self.sim.slots,
            snr_db: self.sim.snr_db,
            carrier_hz: self.sim.carrier_hz,
            speed_kmh: self.sim.speed_kmh,
            slot_s: self.sim.slot_s,
            paths: self.sim.paths,
            seed,
        }
    }

    pub fn meta_config(&self, seed: u64) -> MetaConfig {
        MetaConfig {
            alpha: self.meta.alpha,
            beta: self.meta.beta,
            batch_size: self.meta.batch_size,
            n_epoch: self.meta.n_epoch,
            t_ad: self.meta.t_ad,
            first_order: self.meta.first_order,
            seed,
        }
    }

    pub fn mlp_spec(&self) -> MlpSpec {
        MlpSpec::for_channel(
            self.sim.antennas,
            self.dataset.n_o,
            self.mlp.hidden_layers,
            self.mlp.hidden_width,
        )
    }

    pub fn dip_config(&self) -> DipConfig {
        DipConfig {
            depth: self.dip.depth,
            filters: self.dip.filters,
            n_iter: self.dip.n_iter,
            lr: self.dip.lr,
            z_std: self.dip.z_std,
            auto_pad: self.dip.auto_pad,
        }
    }

    /// Copy with the sweep variable set to `value`.
    pub fn with_value(&self, var: SweepVar, value: f64) -> Result<Self> {
        let mut cfg = self.clone();
        let count = || -> Result<usize> {
            if value >= 0.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!(
                    "sweep value {value} for {var} must be a non-negative integer"
                )))
            }
        };
        match var {
            SweepVar::SnrDb => cfg.sim.snr_db = value,
            SweepVar::SpeedKmh => cfg.sim.speed_kmh = value,
            SweepVar::NAd => cfg.dataset.n_ad = count()?,
            SweepVar::TAd => cfg.meta.t_ad = count()?,
            SweepVar::NO => cfg.dataset.n_o = count()?,
            SweepVar::TasksPerUe => cfg.dataset.tasks_per_ue = count()?,
        }
        Ok(cfg)
    }

    /// `(value, config)` for each sweep point; one point without a sweep.
    pub fn points(&self) -> Result<Vec<(Option<f64>, Self)>> {
        match self.sweep.variable {
            None => Ok(vec![(None, self.clone())]),
            Some(var) => self
                .sweep
                .values
                .iter()
                .map(|&v| Ok((Some(v), self.with_value(var, v)?)))
                .collect(),
        }
    }

    /// Checks this configuration and every sweep point derived from it.
    pub fn validate(&self) -> Result<()> {
        if self.sweep.variable.is_none() && !self.sweep.values.is_empty() {
            return Err(Error::Config("sweep.values given without sweep.variable".into()));
        }
        if self.sweep.variable.is_some() && self.sweep.values.is_empty() {
            return Err(Error::Config("sweep.variable given without sweep.values".into()));
        }
        if self.sweep.seeds.is_empty() {
            return Err(Error::Config("sweep.seeds must list at least one seed".into()));
        }
        if self.sweep.methods.is_empty() {
            return Err(Error::Config("sweep.methods must list at least one method".into()));
        }
        if !self.dip.enabled && self.sweep.methods.iter().any(|m| m.uses_dip()) {
            return Err(Error::Config("DIP methods requested but dip.enabled = false".into()));
        }
        for (_, p) in self.points()? {
            p.validate_point()?;
        }
        Ok(())
    }

    fn validate_point(&self) -> Result<()> {
        let d = &self.dataset;
        self.sim_config(0).validate(d.n_o)?;
        self.meta_config(0).validate()?;
        self.mlp_spec().validate()?;
        if self.dip.enabled {
            self.dip_config().spec_for(self.sim.antennas, self.sim.slots)?;
        }
        if d.source_ues == 0 || d.tasks_per_ue == 0 {
            return Err(Error::Config(
                "dataset.source_ues and dataset.tasks_per_ue must be at least 1".into(),
            ));
        }
        if d.target_ues == 0 || d.target_ues > self.sim.antennas {
            return Err(Error::Config(format!(
                "dataset.target_ues = {} must be between 1 and sim.antennas = {}",
                d.target_ues, self.sim.antennas
            )));
        }
        if d.n_s == 0 || d.n_q == 0 || d.n_ad == 0 || d.n_te == 0 {
            return Err(Error::Config(
                "dataset.n_s, n_q, n_ad and n_te must be at least 1".into(),
            ));
        }
        let windows = self.sim.slots.saturating_sub(d.n_o);
        for (what, need) in [("n_s + n_q", d.n_s + d.n_q), ("n_ad + n_te", d.n_ad + d.n_te)] {
            if need > windows {
                return Err(Error::Config(format!(
                    "dataset.{what} = {need} exceeds the {windows} prediction windows of a {}-slot trace with n_o = {}",
                    self.sim.slots, d.n_o
                )));
            }
        }
        Ok(())
    }
}
