//! File formats, configuration loading, parallel evaluation and the `rail`
//! command line on top of [`rail_core`].
//!
//! Every file written here carries [`SCHEMA_VERSION`] and the hash of the
//! experiment configuration that produced it.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
mod error;
pub mod parallel;
pub mod report;
pub mod telemetry;
pub mod theory;

pub use error::{RailError, Result};

/// Version of every on-disk format in this crate.
pub const SCHEMA_VERSION: u32 = 1;

/// Lines starting with this byte are comments in the CSV tables.
pub const CSV_COMMENT: u8 = b'#';

/// `# schema_version=1 config_hash=...` header for CSV tables.
pub fn csv_header_line(config_hash: &str) -> String {
    format!("# schema_version={SCHEMA_VERSION} config_hash={config_hash}\n")
}

/// Parse the header written by [`csv_header_line`].
pub fn parse_csv_header(line: &str) -> Result<(u32, String)> {
    let bad = || RailError::Schema(format!("missing or malformed table header: {line:?}"));
    let rest = line.trim_end().strip_prefix("# ").ok_or_else(bad)?;
    let mut version = None;
    let mut hash = None;
    for field in rest.split(' ') {
        match field.split_once('=') {
            Some(("schema_version", v)) => version = Some(v.parse::<u32>().map_err(|_| bad())?),
            Some(("config_hash", h)) => hash = Some(h.to_string()),
            _ => return Err(bad()),
        }
    }
    let version = version.ok_or_else(bad)?;
    check_schema(version)?;
    Ok((version, hash.ok_or_else(bad)?))
}

pub fn check_schema(version: u32) -> Result<()> {
    if version == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(RailError::Schema(format!(
            "unsupported schema version {version} (this build reads {SCHEMA_VERSION})"
        )))
    }
}
