//! Append-only JSON-lines telemetry, one row per iteration after a header
//! line.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rail_core::config::ExperimentConfig;
use rail_core::trainer::{Telemetry, TrainObserver, TrainState};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{checkpoint_path, save_checkpoint, Checkpoint};
use crate::config::config_hash;
use crate::{check_schema, RailError, Result, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelemetryHeader {
    pub schema_version: u32,
    pub config_hash: String,
}

pub struct TelemetryLog {
    path: PathBuf,
    file: File,
}

impl TelemetryLog {
    /// Start a new log, truncating any existing file.
    pub fn create(path: &Path, config_hash: &str) -> Result<Self> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| RailError::io(parent, e))?;
        }
        let file = File::create(path).map_err(|e| RailError::io(path, e))?;
        let mut log = Self {
            path: path.to_path_buf(),
            file,
        };
        let header = TelemetryHeader {
            schema_version: SCHEMA_VERSION,
            config_hash: config_hash.into(),
        };
        log.write_line(&serde_json::to_string(&header)?)?;
        Ok(log)
    }

    /// Reopen an existing log for appending after checking its header.
    pub fn append(path: &Path, config_hash: &str) -> Result<Self> {
        let (header, _) = read_telemetry(path)?;
        if header.config_hash != config_hash {
            return Err(RailError::Schema(format!(
                "{}: written by config {}, not {config_hash}",
                path.display(),
                header.config_hash
            )));
        }
        let file = OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|e| RailError::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn push(&mut self, row: &Telemetry) -> Result<()> {
        self.write_line(&serde_json::to_string(row)?)
    }

    fn write_line(&mut self, line: &str) -> Result<()> {
        writeln!(self.file, "{line}").map_err(|e| RailError::io(&self.path, e))
    }
}

pub fn read_telemetry(path: &Path) -> Result<(TelemetryHeader, Vec<Telemetry>)> {
    let file = File::open(path).map_err(|e| RailError::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| RailError::Schema(format!("{}: empty telemetry log", path.display())))?
        .map_err(|e| RailError::io(path, e))?;
    let header: TelemetryHeader = serde_json::from_str(&first)?;
    check_schema(header.schema_version)?;
    let mut rows = Vec::new();
    for line in lines {
        let line = line.map_err(|e| RailError::io(path, e))?;
        if !line.is_empty() {
            rows.push(serde_json::from_str(&line)?);
        }
    }
    Ok((header, rows))
}

/// Observer that appends telemetry every iteration and writes checkpoints
/// into `dir` at the configured interval.
pub struct RunRecorder<'a> {
    pub config: &'a ExperimentConfig,
    pub dir: PathBuf,
    pub log: TelemetryLog,
    pub checkpoints: Vec<PathBuf>,
    failure: Option<RailError>,
}

impl<'a> RunRecorder<'a> {
    /// `resume_at` is the iteration of the checkpoint being resumed; rows
    /// the log holds past it are dropped so the log matches a straight run.
    pub fn new(config: &'a ExperimentConfig, dir: &Path, resume_at: Option<usize>) -> Result<Self> {
        let hash = config_hash(config);
        let path = dir.join(TELEMETRY_FILE);
        let log = match resume_at {
            Some(done) if path.exists() => {
                let (header, rows) = read_telemetry(&path)?;
                if header.config_hash != hash {
                    return Err(RailError::Schema(format!(
                        "{}: written by config {}, not {hash}",
                        path.display(),
                        header.config_hash
                    )));
                }
                let mut log = TelemetryLog::create(&path, &hash)?;
                for row in rows.iter().filter(|r| r.iteration < done) {
                    log.push(row)?;
                }
                log
            }
            _ => TelemetryLog::create(&path, &hash)?,
        };
        Ok(Self {
            config,
            dir: dir.to_path_buf(),
            log,
            checkpoints: Vec::new(),
            failure: None,
        })
    }

    pub fn save(&mut self, state: &TrainState) -> Result<PathBuf> {
        let path = checkpoint_path(&self.dir, state.iteration);
        save_checkpoint(&path, &Checkpoint::new(self.config, state.clone()))?;
        self.checkpoints.push(path.clone());
        Ok(path)
    }

    /// Prefer the recorder's own I/O error over the generic error the
    /// training loop reports after an observer failure.
    pub fn resolve<T>(&mut self, result: rail_core::Result<T>) -> Result<T> {
        match (result, self.failure.take()) {
            (Err(_), Some(e)) => Err(e),
            (r, _) => r.map_err(RailError::from),
        }
    }

    fn stash(&mut self, r: Result<()>) -> rail_core::Result<()> {
        r.map_err(|e| {
            let msg = e.to_string();
            self.failure = Some(e);
            rail_core::Error::Config(msg)
        })
    }
}

pub const TELEMETRY_FILE: &str = "telemetry.jsonl";

impl TrainObserver for RunRecorder<'_> {
    fn on_iteration(&mut self, state: &TrainState) -> rail_core::Result<()> {
        let r = match state.last_telemetry() {
            Some(row) => self.log.push(row),
            None => Ok(()),
        };
        self.stash(r)
    }

    fn on_checkpoint(&mut self, state: &TrainState) -> rail_core::Result<()> {
        let r = self.save(state).map(|_| ());
        self.stash(r)
    }
}
