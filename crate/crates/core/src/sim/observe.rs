use serde::{Deserialize, Serialize};

use super::{rectangle_gap, SafetyReadout, Scene, VehicleState};
use crate::Result;

pub const OBSERVATION_DIM: usize = 24;

/// Neighbour slots in feature order.
pub const SLOT_NAMES: [&str; 6] = [
    "fore_left",
    "fore_same",
    "fore_right",
    "rear_left",
    "rear_same",
    "rear_right",
];

/// Per-vehicle feature vector.
///
/// Layout: ego speed, ego accel, lane offset, heading error, `d_left`,
/// `d_right`, then for each slot in [`SLOT_NAMES`] order the bumper gap (m),
/// relative speed (other minus ego, m/s) and an occupancy flag. Empty slots
/// read `(sensor_range, 0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Observation(pub [f64; OBSERVATION_DIM]);

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn slot(&self, k: usize) -> (f64, f64, f64) {
        let b = 6 + 3 * k;
        (self.0[b], self.0[b + 1], self.0[b + 2])
    }
}

/// `(d_left, d_right)`: distances from the vehicle body to the left and right
/// road edges.
pub(crate) fn edge_distances(scene: &Scene, v: &VehicleState) -> (f64, f64) {
    let hw = scene.road.half_width();
    let (lo, hi) = v.rect().y_extent();
    (hw - hi, lo + hw)
}

/// `true` when `other` counts as ahead of `ego` (ties broken by id).
pub(crate) fn is_ahead(ego: &VehicleState, other: &VehicleState) -> bool {
    other.x > ego.x || (other.x == ego.x && other.id > ego.id)
}

pub fn observe(scene: &Scene, vehicle_id: u32, sensor_range: f64) -> Result<Observation> {
    let ego = scene.vehicle(vehicle_id)?;
    let mut f = [0.0; OBSERVATION_DIM];
    let (d_left, d_right) = edge_distances(scene, ego);
    f[0] = ego.speed;
    f[1] = ego.accel;
    f[2] = ego.y - scene.road.lane_center(ego.lane_index);
    f[3] = ego.heading;
    f[4] = d_left;
    f[5] = d_right;

    let lane = ego.lane_index as isize;
    let lanes = [lane + 1, lane, lane - 1];
    // best[slot] = (|dx|, id, index)
    let mut best: [Option<(f64, u32, usize)>; 6] = [None; 6];
    for (j, other) in scene.vehicles.iter().enumerate() {
        if other.id == ego.id {
            continue;
        }
        let dx = other.x - ego.x;
        if dx.abs() > sensor_range {
            continue;
        }
        let Some(side) = lanes.iter().position(|&l| l == other.lane_index as isize) else {
            continue;
        };
        let slot = if is_ahead(ego, other) { side } else { 3 + side };
        let key = (dx.abs(), other.id);
        let better = match best[slot] {
            None => true,
            Some((d, id, _)) => key.0 < d || (key.0 == d && key.1 < id),
        };
        if better {
            best[slot] = Some((key.0, key.1, j));
        }
    }
    for (k, b) in best.iter().enumerate() {
        let base = 6 + 3 * k;
        match b {
            Some((dx, _, j)) => {
                let other = &scene.vehicles[*j];
                f[base] = dx - (ego.length + other.length) / 2.0;
                f[base + 1] = other.speed - ego.speed;
                f[base + 2] = 1.0;
            }
            None => {
                f[base] = sensor_range;
            }
        }
    }
    Ok(Observation(f))
}

pub fn safety_readout(scene: &Scene, vehicle_id: u32) -> Result<SafetyReadout> {
    let ego = scene.vehicle(vehicle_id)?;
    let rect = ego.rect();
    let d_c = scene
        .vehicles
        .iter()
        .filter(|o| o.id != ego.id)
        .map(|o| rectangle_gap(&rect, &o.rect()))
        .fold(f64::INFINITY, f64::min);
    let (d_left, d_right) = edge_distances(scene, ego);
    Ok(SafetyReadout {
        d_c,
        d_road: d_left.min(d_right),
        accel: ego.accel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{RoadSpec, VehicleState};
    use crate::Error;
    use alloc::vec;

    fn car(id: u32, x: f64, y: f64, speed: f64, road: &RoadSpec) -> VehicleState {
        VehicleState {
            id,
            x,
            y,
            heading: 0.0,
            speed,
            accel: 0.0,
            length: 4.0,
            width: 1.8,
            lane_index: road.lane_of(y),
        }
    }

    fn road() -> RoadSpec {
        RoadSpec {
            lane_count: 3,
            lane_width: 3.7,
            length: 300.0,
        }
    }

    #[test]
    fn lone_vehicle_slots_empty() {
        let r = road();
        let s = Scene {
            time_step: 0,
            vehicles: vec![car(0, 10.0, 0.0, 20.0, &r)],
            road: r,
        };
        let o = observe(&s, 0, 80.0).unwrap();
        for k in 0..6 {
            assert_eq!(o.slot(k), (80.0, 0.0, 0.0));
        }
        assert_eq!(o.0[0], 20.0);
        assert_eq!(o.0[2], 0.0);
        assert!((o.0[4] - (r.half_width() - 0.9)).abs() < 1e-12);
    }

    #[test]
    fn lead_vehicle_same_lane() {
        let r = road();
        let s = Scene {
            time_step: 0,
            vehicles: vec![car(0, 10.0, 0.0, 20.0, &r), car(1, 30.0, 0.0, 20.0, &r)],
            road: r,
        };
        let o = observe(&s, 0, 80.0).unwrap();
        assert_eq!(o.slot(1), (16.0, 0.0, 1.0));
        let o1 = observe(&s, 1, 80.0).unwrap();
        assert_eq!(o1.slot(4), (16.0, 0.0, 1.0));
    }

    #[test]
    fn unknown_id() {
        let r = road();
        let s = Scene {
            time_step: 0,
            vehicles: vec![car(0, 10.0, 0.0, 20.0, &r)],
            road: r,
        };
        assert_eq!(observe(&s, 9, 80.0).unwrap_err(), Error::UnknownVehicle(9));
        assert_eq!(safety_readout(&s, 9).unwrap_err(), Error::UnknownVehicle(9));
    }

    #[test]
    fn readout_gap_and_overlap() {
        let r = road();
        let s = Scene {
            time_step: 0,
            vehicles: vec![car(0, 0.0, 0.0, 20.0, &r), car(1, 10.0, 0.0, 20.0, &r)],
            road: r,
        };
        assert!((safety_readout(&s, 0).unwrap().d_c - 6.0).abs() < 1e-12);
        let s2 = Scene {
            time_step: 0,
            vehicles: vec![car(0, 0.0, 0.0, 20.0, &r), car(1, 3.0, 0.5, 20.0, &r)],
            road: r,
        };
        assert_eq!(safety_readout(&s2, 0).unwrap().d_c, 0.0);
        assert_eq!(safety_readout(&s2, 1).unwrap().d_c, 0.0);
    }
}
