//! File formats, configuration, experiment orchestration and result
//! emission for the channel-prediction workbench. The numerics live in
//! [`chanpred_core`].

pub mod config;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod report;

pub use chanpred_core as core;
pub use config::{ExperimentConfig, Method, SweepVar};
pub use error::{Error, Result};
