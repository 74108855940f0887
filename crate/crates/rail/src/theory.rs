//! Theory specs in, property reports and objective traces out.

use std::fs;
use std::path::Path;

use rail_core::theory::{verify_theory, TheoryReport, TheorySpec};
use serde::{Deserialize, Serialize};

use crate::config::hash_json;
use crate::dataset::write_file;
use crate::{csv_header_line, RailError, Result, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryReportFile {
    pub schema_version: u32,
    /// Hash of the spec that produced the report.
    pub config_hash: String,
    pub passed: bool,
    pub report: TheoryReport,
}

pub fn load_spec(path: &Path) -> Result<TheorySpec> {
    let text = fs::read_to_string(path).map_err(|e| RailError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| RailError::Config(format!("{}: {e}", path.display())))
}

/// Run the checks and write `theory_report.json` and `theory_trace.csv`.
pub fn run_theory(spec: &TheorySpec, out: &Path) -> Result<TheoryReportFile> {
    let report = verify_theory(spec)?;
    let hash = hash_json(spec);
    let file = TheoryReportFile {
        schema_version: SCHEMA_VERSION,
        config_hash: hash.clone(),
        passed: report.passed(),
        report,
    };
    write_file(&out.join("theory_report.json"), serde_json::to_string_pretty(&file)?.as_bytes())?;
    let mut trace = csv_header_line(&hash);
    trace.push_str("iteration,objective\n");
    for (i, v) in file.report.objective_trace.iter().enumerate() {
        trace.push_str(&format!("{i},{v:?}\n"));
    }
    write_file(&out.join("theory_trace.csv"), trace.as_bytes())?;
    Ok(file)
}
