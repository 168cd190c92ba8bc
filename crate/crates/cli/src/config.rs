//! Experiment configuration files: one JSON document whose fields mirror the
//! command-line flags. Flags take precedence over config values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// All configurable fields across experiment kinds; unused fields are
/// ignored by each subcommand.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Experiment kind; when present it must match the subcommand.
    pub kind: Option<String>,
    pub model: Option<PathBuf>,
    pub language: Option<PathBuf>,
    pub dist: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub x: Option<PathBuf>,
    pub y: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub n: Option<i64>,
    pub blocks: Option<usize>,
    pub retries: Option<usize>,
    pub epsilon: Option<f64>,
    pub alphabet: Option<u32>,
    pub len: Option<usize>,
    pub budget: Option<usize>,
    pub radii: Option<Vec<i64>>,
    pub n0: Option<i64>,
    pub threshold: Option<f64>,
    pub radius: Option<usize>,
    pub shift_bound: Option<i64>,
    pub mode: Option<String>,
    pub path_len: Option<usize>,
    pub ladder_max: Option<usize>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, recurlab::Error> {
        let text = std::fs::read_to_string(path)?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| recurlab::Error::Parameter(format!("bad config file: {e}")))?;
        Ok(config)
    }

    pub fn check_kind(&self, expected: &str) -> Result<(), recurlab::Error> {
        if let Some(kind) = &self.kind {
            if kind != expected {
                return Err(recurlab::Error::Parameter(format!(
                    "config is for kind {kind:?}, invoked as {expected:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Flag > config > environment (`RECURLAB_SEED`) > 0.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> u64 {
    flag.or(config)
        .or_else(|| {
            std::env::var("RECURLAB_SEED")
                .ok()
                .and_then(|s| s.parse().ok())
        })
        .unwrap_or(0)
}
