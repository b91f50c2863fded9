//! Experiment orchestration: stored run configurations, run artifacts, and
//! the acceptance criteria behind `verify-all`.
//!
//! Every run lives in its own directory holding `config.json` (the fully
//! materialized configuration — re-running it reproduces every statistic
//! byte for byte), `manifest.json` (crash-safe status: `running` until the
//! run finishes, then `complete` with the closed file list), the
//! command-specific CSV tables, two-column `.dat` series with a `plots.json`
//! index, `summary.json` (deterministic results), and `run-meta.json`
//! (wall-clock only, so it is the one file allowed to differ between
//! identical runs). All files are written atomically (temp file + rename)
//! from a single thread.

pub mod criteria;

use crate::rng::{stream_for, RngStream};
use crate::vfunction::{VError, VTable};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;
pub const SUMMARY_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config {path}: {reason}")]
    Config { path: String, reason: String },
    #[error("V table {path}: {reason}")]
    MissingTable { path: String, reason: String },
    #[error("{dir}: a completed run already lives here; completed runs are immutable, pick a fresh directory")]
    CompletedRun { dir: String },
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

/// Fully materialized description of one run: experiment name, seed, and a
/// flat key → value parameter map. A stored config carries every parameter
/// the run used — defaults are resolved before writing, never at read time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
}

impl ExperimentConfig {
    pub fn new(experiment: &str, seed: u64) -> Self {
        ExperimentConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            experiment: experiment.to_string(),
            seed,
            output_dir: None,
            params: BTreeMap::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let err = |reason: String| HarnessError::Config {
            path: path.display().to_string(),
            reason,
        };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        if cfg.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(err(format!(
                "schema version {} unsupported (expected {CONFIG_SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    /// Guard a config file against being replayed under the wrong subcommand.
    pub fn require_experiment(&self, name: &str, path: &Path) -> Result<(), HarnessError> {
        if !self.experiment.is_empty() && self.experiment != name {
            return Err(HarnessError::Config {
                path: path.display().to_string(),
                reason: format!("written for experiment {:?}, not {name:?}", self.experiment),
            });
        }
        Ok(())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.params.get(key).and_then(Value::as_f64)
    }

    pub fn get_u64(&self, key: &str) -> Option<u64> {
        self.params.get(key).and_then(Value::as_u64)
    }

    pub fn get_usize(&self, key: &str) -> Option<usize> {
        self.get_u64(key).map(|v| v as usize)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.params.get(key).and_then(Value::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.params.insert(key.to_string(), value.into());
    }

    /// The run's root random stream: seed from the config, stream id hashed
    /// from the experiment name and replica index.
    pub fn stream(&self, replica: u64) -> RngStream {
        RngStream::new(self.seed, stream_for(&self.experiment, replica))
    }
}

/// Load the V-table artifact a command depends on; `None` or an unreadable
/// path is the dedicated missing-dependency failure (exit code 4 in the CLI).
pub fn load_required_table(path: Option<&Path>) -> Result<VTable, HarnessError> {
    let path = path.ok_or_else(|| HarnessError::MissingTable {
        path: "(none)".to_string(),
        reason: "this command needs --vtable FILE; build one with `hslg build-vtable`".to_string(),
    })?;
    VTable::load_json(path).map_err(|e: VError| HarnessError::MissingTable {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

/// One entry of `plots.json`: a two-column data file plus axis labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlotSpec {
    pub file: String,
    pub x_label: String,
    pub y_label: String,
    pub title: String,
}

/// The deterministic half of a finished run, serialized as `summary.json`.
#[derive(Debug, Serialize)]
pub struct RunResult {
    pub schema_version: u32,
    pub experiment: String,
    pub config: ExperimentConfig,
    pub replicas: u64,
    pub artifacts: Vec<String>,
    pub summary: Value,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    schema_version: u32,
    experiment: String,
    status: String,
    files: Vec<String>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, HarnessError> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes one run directory. Created with the materialized config, it
/// stamps a `running` manifest immediately; `finish` closes the run with
/// `summary.json`, `run-meta.json`, and the `complete` manifest. A crash in
/// between leaves the `running` manifest behind, and because runs are
/// deterministic in their stored config, re-running that config in a fresh
/// directory is the resume path.
pub struct RunWriter {
    dir: PathBuf,
    config: ExperimentConfig,
    files: Vec<String>,
    started: std::time::Instant,
}

impl RunWriter {
    pub fn create(dir: &Path, config: &ExperimentConfig) -> Result<Self, HarnessError> {
        let manifest_path = dir.join("manifest.json");
        if let Ok(text) = fs::read_to_string(&manifest_path) {
            if let Ok(m) = serde_json::from_str::<Manifest>(&text) {
                if m.status == "complete" {
                    return Err(HarnessError::CompletedRun {
                        dir: dir.display().to_string(),
                    });
                }
            }
        }
        fs::create_dir_all(dir)?;
        let w = RunWriter {
            dir: dir.to_path_buf(),
            config: config.clone(),
            files: vec!["config.json".to_string()],
            started: std::time::Instant::now(),
        };
        write_atomic(&dir.join("config.json"), &json_bytes(config)?)?;
        w.write_manifest("running")?;
        Ok(w)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn write_manifest(&self, status: &str) -> Result<(), HarnessError> {
        let m = Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            experiment: self.config.experiment.clone(),
            status: status.to_string(),
            files: self.files.clone(),
        };
        write_atomic(&self.dir.join("manifest.json"), &json_bytes(&m)?)?;
        Ok(())
    }

    fn record(&mut self, name: &str, bytes: &[u8]) -> Result<(), HarnessError> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Header plus preformatted rows; fields containing commas must arrive
    /// already quoted.
    pub fn write_csv(
        &mut self,
        name: &str,
        header: &str,
        rows: impl IntoIterator<Item = String>,
    ) -> Result<(), HarnessError> {
        let mut text = String::from(header);
        text.push('\n');
        for row in rows {
            text.push_str(&row);
            text.push('\n');
        }
        self.record(name, text.as_bytes())
    }

    /// Two-column whitespace-separated series, ready for any plotting tool.
    pub fn write_series(&mut self, name: &str, points: &[(f64, f64)]) -> Result<(), HarnessError> {
        let mut text = String::new();
        for (x, y) in points {
            text.push_str(&format!("{x} {y}\n"));
        }
        self.record(name, text.as_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), HarnessError> {
        let bytes = json_bytes(value)?;
        self.record(name, &bytes)
    }

    pub fn write_plots(&mut self, plots: &[PlotSpec]) -> Result<(), HarnessError> {
        let bytes = json_bytes(&plots)?;
        self.record("plots.json", &bytes)
    }

    pub fn finish(mut self, replicas: u64, summary: Value) -> Result<RunResult, HarnessError> {
        let result = RunResult {
            schema_version: SUMMARY_SCHEMA_VERSION,
            experiment: self.config.experiment.clone(),
            config: self.config.clone(),
            replicas,
            artifacts: {
                let mut a = self.files.clone();
                a.push("summary.json".to_string());
                a
            },
            summary,
        };
        let bytes = json_bytes(&result)?;
        self.record("summary.json", &bytes)?;
        let meta = serde_json::json!({
            "schema_version": SUMMARY_SCHEMA_VERSION,
            "wall_clock_seconds": self.started.elapsed().as_secs_f64(),
        });
        self.record("run-meta.json", &json_bytes(&meta)?)?;
        self.write_manifest("complete")?;
        Ok(result)
    }
}

/// Empirical CDF of a weighted sample as a plottable step-point series.
pub fn ecdf_points(d: &crate::stats::EmpiricalDistribution) -> Vec<(f64, f64)> {
    let mut cum = 0.0;
    d.values()
        .iter()
        .zip(d.weights())
        .map(|(x, w)| {
            cum += w;
            (*x, cum)
        })
        .collect()
}
