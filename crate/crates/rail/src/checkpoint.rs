//! Trainer checkpoints as JSON with full-precision decimal floats.

use std::fs;
use std::path::{Path, PathBuf};

use rail_core::config::ExperimentConfig;
use rail_core::trainer::TrainState;
use serde::{Deserialize, Serialize};

use crate::config::config_hash;
use crate::dataset::write_file;
use crate::{check_schema, RailError, Result, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub state: TrainState,
}

impl Checkpoint {
    pub fn new(config: &ExperimentConfig, state: TrainState) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            config_hash: config_hash(config),
            config: config.clone(),
            state,
        }
    }
}

pub fn checkpoint_path(dir: &Path, iteration: usize) -> PathBuf {
    dir.join(format!("checkpoint_{iteration:06}.json"))
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let text = serde_json::to_string_pretty(ckpt)?;
    write_file(path, text.as_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| RailError::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let version = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| RailError::Schema(format!("{}: no schema_version", path.display())))?;
    check_schema(u32::try_from(version).unwrap_or(u32::MAX))?;
    let ckpt: Checkpoint = serde_json::from_value(value)?;
    if config_hash(&ckpt.config) != ckpt.config_hash {
        return Err(RailError::Schema(format!(
            "{}: embedded config does not match its hash",
            path.display()
        )));
    }
    Ok(ckpt)
}
