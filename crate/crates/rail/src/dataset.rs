//! Expert demonstration datasets: a `records.csv` table plus a
//! `manifest.toml` next to it.
//!
//! Only states and applied actions are stored. Observations and safety
//! readouts are recomputed from the states on load, which reproduces the
//! in-memory trajectories exactly.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rail_core::config::ExperimentConfig;
use rail_core::sim::{
    observe, safety_readout, Action, ControllerKind, Scene, SimConfig, StepRecord, Trajectory, VehicleState,
};
use rail_core::trainer::DemoScene;
use serde::{Deserialize, Serialize};

use crate::config::config_hash;
use crate::{check_schema, csv_header_line, parse_csv_header, RailError, Result, SCHEMA_VERSION};

pub const RECORDS_FILE: &str = "records.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub config_hash: String,
    pub scene_count: usize,
    pub record_count: usize,
    pub records: String,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub scene_id: u32,
    pub t: usize,
    pub vehicle_id: u32,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub accel: f64,
    pub lane_index: usize,
    pub action_accel: f64,
    pub action_turn_rate: f64,
}

/// Flatten demos into records sorted by `(scene_id, t, vehicle_id)`.
pub fn to_records(demos: &[DemoScene]) -> Vec<Record> {
    let mut out = Vec::new();
    for d in demos {
        for tr in &d.trajectories {
            for r in &tr.records {
                out.push(Record {
                    scene_id: d.scene_id,
                    t: r.t,
                    vehicle_id: tr.vehicle_id,
                    x: r.state.x,
                    y: r.state.y,
                    heading: r.state.heading,
                    speed: r.state.speed,
                    accel: r.state.accel,
                    lane_index: r.state.lane_index,
                    action_accel: r.action.accel,
                    action_turn_rate: r.action.turn_rate,
                });
            }
        }
    }
    out.sort_by_key(|r| (r.scene_id, r.t, r.vehicle_id));
    out
}

/// Rebuild trajectories from sorted records.
pub fn from_records(records: &[Record], sim: &SimConfig) -> Result<Vec<DemoScene>> {
    let mut by_scene: BTreeMap<u32, BTreeMap<usize, Vec<&Record>>> = BTreeMap::new();
    let mut prev: Option<(u32, usize, u32)> = None;
    for r in records {
        let key = (r.scene_id, r.t, r.vehicle_id);
        if prev.is_some_and(|p| p >= key) {
            return Err(RailError::Schema(format!(
                "records not strictly sorted by (scene_id, t, vehicle_id) at {key:?}"
            )));
        }
        prev = Some(key);
        by_scene.entry(r.scene_id).or_default().entry(r.t).or_default().push(r);
    }
    let road = sim.road();
    let mut demos = Vec::with_capacity(by_scene.len());
    for (scene_id, steps) in by_scene {
        let ids: Vec<u32> = steps.values().next().map(|v| v.iter().map(|r| r.vehicle_id).collect()).unwrap_or_default();
        let mut trajectories: Vec<Trajectory> = ids
            .iter()
            .map(|&id| Trajectory {
                vehicle_id: id,
                controller: ControllerKind::Expert,
                records: Vec::with_capacity(steps.len()),
            })
            .collect();
        for (expected, (&t, rows)) in steps.iter().enumerate() {
            if t != expected {
                return Err(RailError::Schema(format!(
                    "scene {scene_id}: timestamps not contiguous, expected t={expected} got t={t}"
                )));
            }
            let row_ids: Vec<u32> = rows.iter().map(|r| r.vehicle_id).collect();
            if row_ids != ids {
                return Err(RailError::Schema(format!(
                    "scene {scene_id} t={t}: vehicle set differs from t=0"
                )));
            }
            let scene = Scene {
                time_step: t,
                vehicles: rows
                    .iter()
                    .map(|r| VehicleState {
                        id: r.vehicle_id,
                        x: r.x,
                        y: r.y,
                        heading: r.heading,
                        speed: r.speed,
                        accel: r.accel,
                        length: sim.vehicle_length,
                        width: sim.vehicle_width,
                        lane_index: r.lane_index,
                    })
                    .collect(),
                road,
            };
            for (tr, (r, state)) in trajectories.iter_mut().zip(rows.iter().zip(&scene.vehicles)) {
                tr.records.push(StepRecord {
                    t,
                    observation: observe(&scene, r.vehicle_id, sim.sensor_range)?,
                    action: Action::new(r.action_accel, r.action_turn_rate),
                    state: *state,
                    readout: safety_readout(&scene, r.vehicle_id)?,
                });
            }
        }
        demos.push(DemoScene { scene_id, trajectories });
    }
    Ok(demos)
}

/// Write `records.csv` and `manifest.toml` into `dir`.
pub fn write_dataset(dir: &Path, demos: &[DemoScene], cfg: &ExperimentConfig) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| RailError::io(dir, e))?;
    let hash = config_hash(cfg);
    let records = to_records(demos);
    let path = dir.join(RECORDS_FILE);
    let mut buf = csv_header_line(&hash).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in &records {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| RailError::io(&path, e))?;
    }
    write_file(&path, &buf)?;

    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        config_hash: hash,
        scene_count: demos.len(),
        record_count: records.len(),
        records: RECORDS_FILE.into(),
        config: cfg.clone(),
    };
    let text = toml::to_string(&manifest).map_err(|e| RailError::Other(e.to_string()))?;
    write_file(&dir.join(MANIFEST_FILE), text.as_bytes())?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| RailError::io(&path, e))?;
    #[derive(Deserialize)]
    struct Version {
        schema_version: u32,
    }
    let v: Version = toml::from_str(&text).map_err(|e| RailError::Schema(format!("{}: {e}", path.display())))?;
    check_schema(v.schema_version)?;
    toml::from_str(&text).map_err(|e| RailError::Schema(format!("{}: {e}", path.display())))
}

/// Load a dataset and check the table against its manifest.
pub fn read_dataset(dir: &Path) -> Result<(Manifest, Vec<DemoScene>)> {
    let manifest = read_manifest(dir)?;
    let path = dir.join(&manifest.records);
    let text = fs::read_to_string(&path).map_err(|e| RailError::io(&path, e))?;
    let first = text.lines().next().unwrap_or_default();
    let (_, hash) = parse_csv_header(first)?;
    if hash != manifest.config_hash {
        return Err(RailError::Schema(format!(
            "{}: config hash {hash} does not match manifest {}",
            path.display(),
            manifest.config_hash
        )));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(crate::CSV_COMMENT))
        .from_reader(text.as_bytes());
    let records = rdr.deserialize().collect::<Result<Vec<Record>, _>>()?;
    if records.len() != manifest.record_count {
        return Err(RailError::Schema(format!(
            "manifest lists {} records, table has {}",
            manifest.record_count,
            records.len()
        )));
    }
    let demos = from_records(&records, &manifest.config.sim)?;
    if demos.len() != manifest.scene_count {
        return Err(RailError::Schema(format!(
            "manifest lists {} scenes, table has {}",
            manifest.scene_count,
            demos.len()
        )));
    }
    Ok((manifest, demos))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| RailError::io(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| RailError::io(path, e))?;
    f.write_all(bytes).map_err(|e| RailError::io(path, e))
}

pub fn dataset_dir(out: &Path) -> PathBuf {
    out.join("demos")
}
