//! Metric reports as JSON plus plot-ready CSV tables.

use std::fs;
use std::path::{Path, PathBuf};

use rail_core::metrics::{compare_reports, MetricComparison, MetricReport, SPEED_BIN_WIDTH};
use serde::{Deserialize, Serialize};

use crate::dataset::write_file;
use crate::{check_schema, csv_header_line, RailError, Result, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub schema_version: u32,
    pub config_hash: String,
    pub label: String,
    pub checkpoint: Option<String>,
    pub seed: u64,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonFile {
    pub schema_version: u32,
    pub config_hash: String,
    pub a: String,
    pub b: String,
    pub reference: String,
    pub metrics: Vec<MetricComparison>,
}

/// Paths written by [`write_report`].
#[derive(Debug, Clone)]
pub struct ReportPaths {
    pub json: PathBuf,
    pub rmse: PathBuf,
    pub histogram: PathBuf,
}

pub fn report_paths(dir: &Path, label: &str) -> ReportPaths {
    ReportPaths {
        json: dir.join(format!("{label}_report.json")),
        rmse: dir.join(format!("{label}_rmse.csv")),
        histogram: dir.join(format!("{label}_speed_hist.csv")),
    }
}

fn table<R: Serialize>(hash: &str, rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>> {
    let mut buf = csv_header_line(hash).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| RailError::Other(e.to_string()))?;
    }
    Ok(buf)
}

#[derive(Serialize)]
struct RmseRow {
    t: usize,
    rmse_position: f64,
    rmse_lane_offset: f64,
    rmse_speed: f64,
}

#[derive(Serialize)]
struct HistRow {
    bin: usize,
    speed_low: f64,
    speed_high: f64,
    fraction: f64,
}

pub fn write_report(dir: &Path, file: &ReportFile) -> Result<ReportPaths> {
    let paths = report_paths(dir, &file.label);
    let r = &file.report;
    write_file(&paths.json, serde_json::to_string_pretty(file)?.as_bytes())?;
    let rmse = (0..r.horizon).map(|t| RmseRow {
        t,
        rmse_position: r.rmse_position[t],
        rmse_lane_offset: r.rmse_lane_offset[t],
        rmse_speed: r.rmse_speed[t],
    });
    write_file(&paths.rmse, &table(&file.config_hash, rmse)?)?;
    let hist = r.speed_histogram.iter().enumerate().map(|(bin, &fraction)| HistRow {
        bin,
        speed_low: bin as f64 * SPEED_BIN_WIDTH,
        speed_high: (bin + 1) as f64 * SPEED_BIN_WIDTH,
        fraction,
    });
    write_file(&paths.histogram, &table(&file.config_hash, hist)?)?;
    Ok(paths)
}

pub fn read_report(path: &Path) -> Result<ReportFile> {
    let text = fs::read_to_string(path).map_err(|e| RailError::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let version = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| RailError::Schema(format!("{}: no schema_version", path.display())))?;
    check_schema(u32::try_from(version).unwrap_or(u32::MAX))?;
    Ok(serde_json::from_value(value)?)
}

#[derive(Serialize)]
struct ComparisonRow<'a> {
    metric: &'a str,
    distance_a: f64,
    distance_b: f64,
    closer: &'a str,
}

/// Compare two reports against a reference and write `compare.json` and
/// `compare.csv` into `dir`.
pub fn write_comparison(dir: &Path, a: &ReportFile, b: &ReportFile, reference: &ReportFile) -> Result<ComparisonFile> {
    let metrics = compare_reports(&a.report, &b.report, &reference.report)?;
    let file = ComparisonFile {
        schema_version: SCHEMA_VERSION,
        config_hash: reference.config_hash.clone(),
        a: a.label.clone(),
        b: b.label.clone(),
        reference: reference.label.clone(),
        metrics,
    };
    write_file(&dir.join("compare.json"), serde_json::to_string_pretty(&file)?.as_bytes())?;
    let rows = file.metrics.iter().map(|m| ComparisonRow {
        metric: &m.metric,
        distance_a: m.distance_a,
        distance_b: m.distance_b,
        closer: match m.closer {
            rail_core::metrics::Verdict::A => &file.a,
            rail_core::metrics::Verdict::B => &file.b,
            rail_core::metrics::Verdict::Tie => "tie",
        },
    });
    write_file(&dir.join("compare.csv"), &table(&file.config_hash, rows)?)?;
    Ok(file)
}

/// One row per scalar metric, one column per report.
pub fn summary_table(reports: &[&ReportFile]) -> String {
    let metrics: [(&str, fn(&MetricReport) -> f64); 7] = [
        ("rmse_position_final", |r| r.final_rmse_position()),
        ("collision_rate", |r| r.collision_rate),
        ("offroad_rate", |r| r.offroad_rate),
        ("hard_brake_rate", |r| r.hard_brake_rate),
        ("lane_changes_per_vehicle", |r| r.lane_changes_per_vehicle),
        ("timegap_mean", |r| r.timegap_mean),
        ("timegap_samples", |r| r.timegap_samples as f64),
    ];
    let mut out = format!("{:<26}", "metric");
    for r in reports {
        out.push_str(&format!(" {:>14}", r.label));
    }
    out.push('\n');
    for (name, f) in metrics {
        out.push_str(&format!("{name:<26}"));
        for r in reports {
            out.push_str(&format!(" {:>14.6}", f(&r.report)));
        }
        out.push('\n');
    }
    out
}
