//! Evaluation battery over paired expert/policy trajectory sets: RMSE
//! curves, undesirable-event rates and fleet-level statistics.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::penalty::{events, PenaltyConfig};
use crate::sim::{RoadSpec, Trajectory};
use crate::{Error, Result};

/// Steps a new lane must be held before it counts as a lane change.
pub const LANE_CHANGE_DEBOUNCE: usize = 5;
pub const SPEED_BINS: usize = 30;
pub const SPEED_BIN_WIDTH: f64 = 1.0;
pub const TIMEGAP_SPEED_FLOOR: f64 = 0.1;
const FORE_SAME_SLOT: usize = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RmseCurves {
    pub position: Vec<f64>,
    pub lane_offset: Vec<f64>,
    pub speed: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EventRates {
    pub collision: f64,
    pub offroad: f64,
    pub hard_brake: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmergentStats {
    pub lane_changes_per_vehicle: f64,
    pub timegap_mean: f64,
    pub timegap_samples: usize,
    pub speed_histogram: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub valid: bool,
    pub rollouts: usize,
    pub vehicles: usize,
    pub horizon: usize,
    pub rmse_position: Vec<f64>,
    pub rmse_lane_offset: Vec<f64>,
    pub rmse_speed: Vec<f64>,
    pub collision_rate: f64,
    pub offroad_rate: f64,
    pub hard_brake_rate: f64,
    /// Event rates count event steps, not episodes.
    pub rate_unit: String,
    pub lane_changes_per_vehicle: f64,
    pub timegap_mean: f64,
    pub timegap_samples: usize,
    pub speed_histogram: Vec<f64>,
}

impl MetricReport {
    pub fn invalid() -> Self {
        Self {
            valid: false,
            rate_unit: "event-steps per vehicle per rollout".into(),
            ..Default::default()
        }
    }

    pub fn final_rmse_position(&self) -> f64 {
        self.rmse_position.last().copied().unwrap_or(f64::NAN)
    }
}

fn lane_offset(road: &RoadSpec, s: &crate::sim::VehicleState) -> f64 {
    s.y - road.lane_center(s.lane_index)
}

/// Per-step RMSE over `(expert, policy)` pairs.
pub fn rmse_curves(pairs: &[(&Trajectory, &Trajectory)], road: &RoadSpec) -> Result<RmseCurves> {
    let Some((e0, _)) = pairs.first() else {
        return Ok(RmseCurves::default());
    };
    let h = e0.records.len();
    for (e, p) in pairs {
        Error::check_dim("expert horizon", h, e.records.len())?;
        Error::check_dim("policy horizon", h, p.records.len())?;
    }
    let mut c = RmseCurves {
        position: vec![0.0; h],
        lane_offset: vec![0.0; h],
        speed: vec![0.0; h],
    };
    for t in 0..h {
        let (mut sp, mut so, mut sv) = (0.0, 0.0, 0.0);
        for (e, p) in pairs {
            let (a, b) = (&e.records[t].state, &p.records[t].state);
            let (dx, dy) = (a.x - b.x, a.y - b.y);
            sp += dx * dx + dy * dy;
            let d = lane_offset(road, a) - lane_offset(road, b);
            so += d * d;
            let d = a.speed - b.speed;
            sv += d * d;
        }
        let n = pairs.len() as f64;
        c.position[t] = crate::math::sqrt(sp / n);
        c.lane_offset[t] = crate::math::sqrt(so / n);
        c.speed[t] = crate::math::sqrt(sv / n);
    }
    Ok(c)
}

/// Event steps per trajectory (one trajectory is one vehicle in one rollout).
pub fn event_rates(trajectories: &[Trajectory], config: &PenaltyConfig) -> EventRates {
    if trajectories.is_empty() {
        return EventRates::default();
    }
    let (mut c, mut o, mut h) = (0usize, 0usize, 0usize);
    for tr in trajectories {
        for r in &tr.records {
            let e = events(&r.readout, config);
            c += e.collision as usize;
            o += e.offroad as usize;
            h += e.hard_brake as usize;
        }
    }
    let n = trajectories.len() as f64;
    EventRates {
        collision: c as f64 / n,
        offroad: o as f64 / n,
        hard_brake: h as f64 / n,
    }
}

/// Lane changes of one trajectory with the debounce rule.
pub fn lane_changes(trajectory: &Trajectory) -> usize {
    let mut it = trajectory.records.iter().map(|r| r.state.lane_index);
    let Some(mut stable) = it.next() else {
        return 0;
    };
    let (mut candidate, mut run, mut count) = (stable, 0usize, 0usize);
    for lane in it {
        if lane == stable {
            run = 0;
            continue;
        }
        if lane == candidate && run > 0 {
            run += 1;
        } else {
            candidate = lane;
            run = 1;
        }
        if run >= LANE_CHANGE_DEBOUNCE {
            count += 1;
            stable = lane;
            run = 0;
        }
    }
    count
}

pub fn speed_bin(speed: f64) -> usize {
    let b = crate::math::floor(speed / SPEED_BIN_WIDTH);
    if b < 0.0 {
        0
    } else {
        (b as usize).min(SPEED_BINS - 1)
    }
}

pub fn emergent_stats(trajectories: &[Trajectory]) -> EmergentStats {
    let mut hist = vec![0.0; SPEED_BINS];
    let (mut changes, mut tg_sum, mut tg_n, mut samples) = (0usize, 0.0, 0usize, 0usize);
    for tr in trajectories {
        changes += lane_changes(tr);
        for r in &tr.records {
            hist[speed_bin(r.state.speed)] += 1.0;
            samples += 1;
            let (gap, _, flag) = r.observation.slot(FORE_SAME_SLOT);
            if flag > 0.0 {
                tg_sum += gap / r.state.speed.max(TIMEGAP_SPEED_FLOOR);
                tg_n += 1;
            }
        }
    }
    if samples > 0 {
        hist.iter_mut().for_each(|h| *h /= samples as f64);
    }
    EmergentStats {
        lane_changes_per_vehicle: if trajectories.is_empty() {
            0.0
        } else {
            changes as f64 / trajectories.len() as f64
        },
        timegap_mean: if tg_n > 0 { tg_sum / tg_n as f64 } else { 0.0 },
        timegap_samples: tg_n,
        speed_histogram: hist,
    }
}

/// Full report for a paired evaluation. `pairs` holds `(expert, policy)`
/// trajectories of the same vehicle from the same initial scene.
pub fn build_report(
    pairs: &[(&Trajectory, &Trajectory)],
    rollouts: usize,
    road: &RoadSpec,
    penalty: &PenaltyConfig,
) -> Result<MetricReport> {
    if rollouts == 0 || pairs.is_empty() {
        return Ok(MetricReport::invalid());
    }
    let curves = rmse_curves(pairs, road)?;
    let policy: Vec<Trajectory> = pairs.iter().map(|(_, p)| (*p).clone()).collect();
    let rates = event_rates(&policy, penalty);
    let stats = emergent_stats(&policy);
    Ok(MetricReport {
        valid: true,
        rollouts,
        vehicles: pairs.len(),
        horizon: curves.position.len(),
        rmse_position: curves.position,
        rmse_lane_offset: curves.lane_offset,
        rmse_speed: curves.speed,
        collision_rate: rates.collision,
        offroad_rate: rates.offroad,
        hard_brake_rate: rates.hard_brake,
        lane_changes_per_vehicle: stats.lane_changes_per_vehicle,
        timegap_mean: stats.timegap_mean,
        timegap_samples: stats.timegap_samples,
        speed_histogram: stats.speed_histogram,
        ..MetricReport::invalid()
    })
}

pub fn total_variation(p: &[f64], q: &[f64]) -> Result<f64> {
    Error::check_dim("histogram bins", p.len(), q.len())?;
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    A,
    B,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: String,
    pub distance_a: f64,
    pub distance_b: f64,
    pub closer: Verdict,
}

fn curve_distance(a: &[f64], r: &[f64]) -> Result<f64> {
    Error::check_dim("curve length", r.len(), a.len())?;
    if a.is_empty() {
        return Ok(0.0);
    }
    let s: f64 = a.iter().zip(r).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(crate::math::sqrt(s / a.len() as f64))
}

/// Per metric, which of `a` and `b` lies closer to `reference`.
pub fn compare_reports(a: &MetricReport, b: &MetricReport, reference: &MetricReport) -> Result<Vec<MetricComparison>> {
    Error::check_dim("report horizon", reference.horizon, a.horizon)?;
    Error::check_dim("report horizon", reference.horizon, b.horizon)?;
    let curves: [(&str, fn(&MetricReport) -> &[f64]); 3] = [
        ("rmse_position", |r| &r.rmse_position),
        ("rmse_lane_offset", |r| &r.rmse_lane_offset),
        ("rmse_speed", |r| &r.rmse_speed),
    ];
    let scalars: [(&str, fn(&MetricReport) -> f64); 5] = [
        ("collision_rate", |r| r.collision_rate),
        ("offroad_rate", |r| r.offroad_rate),
        ("hard_brake_rate", |r| r.hard_brake_rate),
        ("lane_changes_per_vehicle", |r| r.lane_changes_per_vehicle),
        ("timegap_mean", |r| r.timegap_mean),
    ];
    let mut out = Vec::new();
    let mut push = |metric: &str, da: f64, db: f64| {
        let closer = if da < db {
            Verdict::A
        } else if db < da {
            Verdict::B
        } else {
            Verdict::Tie
        };
        out.push(MetricComparison {
            metric: metric.into(),
            distance_a: da,
            distance_b: db,
            closer,
        });
    };
    for (name, f) in curves {
        push(name, curve_distance(f(a), f(reference))?, curve_distance(f(b), f(reference))?);
    }
    for (name, f) in scalars {
        push(name, (f(a) - f(reference)).abs(), (f(b) - f(reference)).abs());
    }
    push(
        "speed_histogram",
        total_variation(&a.speed_histogram, &reference.speed_histogram)?,
        total_variation(&b.speed_histogram, &reference.speed_histogram)?,
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins() {
        assert_eq!(speed_bin(0.0), 0);
        assert_eq!(speed_bin(0.999), 0);
        assert_eq!(speed_bin(1.0), 1);
        assert_eq!(speed_bin(29.5), 29);
        assert_eq!(speed_bin(45.0), 29);
        assert_eq!(speed_bin(-1.0), 0);
    }

    #[test]
    fn tv_direct() {
        let p = [0.5, 0.5, 0.0];
        let q = [0.0, 0.5, 0.5];
        assert!((total_variation(&p, &q).unwrap() - 0.5).abs() < 1e-15);
        assert!(total_variation(&p, &[1.0]).is_err());
    }

    #[test]
    fn empty_report_is_invalid() {
        let r = build_report(&[], 0, &crate::sim::SimConfig::default().road(), &PenaltyConfig::default()).unwrap();
        assert!(!r.valid);
    }
}
