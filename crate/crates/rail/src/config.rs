//! Experiment configuration files and the config hash.

use std::path::Path;

use rail_core::config::ExperimentConfig;
use rail_core::penalty::PenaltyMode;
use sha2::{Digest, Sha256};

use crate::{RailError, Result};

/// Parse a TOML experiment configuration; unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| RailError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| RailError::io(path, e))?;
    parse_config(&text).map_err(|e| match e {
        RailError::Config(m) => RailError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn config_to_toml(cfg: &ExperimentConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| RailError::Other(e.to_string()))
}

/// SHA-256 of the canonical JSON form of `cfg`, hex encoded.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    hash_json(cfg)
}

/// SHA-256 of the compact JSON form of any serializable value.
pub fn hash_json<T: serde::Serialize + ?Sized>(value: &T) -> String {
    let canonical = serde_json::to_string(value).expect("value serializes to JSON");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Command-line overrides applied on top of a loaded configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub penalty: Option<PenaltyMode>,
    pub rollouts: Option<usize>,
    pub out: Option<String>,
}

impl Overrides {
    /// `--seed` sets every seed of the experiment from one number.
    pub fn apply(&self, mut cfg: ExperimentConfig) -> Result<ExperimentConfig> {
        if let Some(s) = self.seed {
            cfg.seeds.demos = s;
            cfg.seeds.train = s.wrapping_add(1);
            cfg.seeds.evaluate = s.wrapping_add(2);
        }
        if let Some(mode) = self.penalty {
            cfg = cfg.with_penalty_mode(mode);
        }
        if let Some(n) = self.rollouts {
            cfg.eval_rollouts = n;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
