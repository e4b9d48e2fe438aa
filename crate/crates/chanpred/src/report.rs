//! CSV emission and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use chanpred_core::eval::EvalReport;
use chanpred_core::meta::LogRow;

use crate::error::{Error, Result};
use crate::experiment::Row;

/// Result columns followed by the sweep value and configuration hash.
pub const HEADER: &str = "seed,snr_db,n_ad,t_ad,method,nmse_db,sum_rate,flops_total,sweep_value,config_hash";

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn csv_line(report: &EvalReport, value: Option<f64>) -> String {
    let value = value.map(|v| v.to_string()).unwrap_or_default();
    format!("{},{},{}", report.csv_row(), value, report.config_echo)
}

pub fn render_csv(rows: &[Row]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&csv_line(&r.report, r.value));
        out.push('\n');
    }
    out
}

/// Writes `rows` with a header; floats keep full round-trip precision.
pub fn emit_csv(rows: &[Row], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Config("refusing to write a CSV without result rows".into()));
    }
    write_text(path, &render_csv(rows))
}

pub fn emit_training_log(log: &[LogRow], path: &Path) -> Result<()> {
    let mut out = String::from("iteration,support_loss,query_loss\n");
    for r in log {
        writeln!(out, "{},{},{}", r.iteration, r.support_loss, r.query_loss).unwrap();
    }
    write_text(path, &out)
}

pub fn emit_loss_history(history: &[f64], path: &Path) -> Result<()> {
    let mut out = String::from("iteration,loss\n");
    for (i, v) in history.iter().enumerate() {
        writeln!(out, "{i},{v}").unwrap();
    }
    write_text(path, &out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub artifacts: Vec<PathBuf>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(config_hash: String, seeds: Vec<u64>) -> Self {
        RunManifest {
            config_hash,
            seeds,
            artifacts: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &toml::to_string(self).expect("manifest serializes"))
    }
}
