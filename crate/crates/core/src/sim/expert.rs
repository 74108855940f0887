//! Rule-based expert drivers: Intelligent Driver Model for car following,
//! MOBIL for lane selection, and a two-gain steering law that tracks the
//! chosen lane centre.
//!
//! Experts are stateless: a lane change in progress is recognised from the
//! vehicle's projected lateral position, so the action depends on the
//! current scene only.

use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::observe::{is_ahead, Observation};
use super::rollout::Controller;
use super::{Action, Scene, VehicleState};
use crate::math::{clamp, powi, sin, sqrt};
use crate::{seeded_rng, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdmParams {
    pub desired_speed: f64,
    pub time_headway: f64,
    pub max_accel: f64,
    pub comfort_decel: f64,
    pub min_gap: f64,
    pub exponent: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            desired_speed: 26.0,
            time_headway: 1.5,
            max_accel: 1.0,
            comfort_decel: 1.5,
            min_gap: 2.0,
            exponent: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MobilParams {
    pub politeness: f64,
    /// Minimum net acceleration gain (m/s^2) to change lanes.
    pub threshold: f64,
    /// The new follower may not be forced to brake harder than this.
    pub safe_decel: f64,
    pub min_front_gap: f64,
    pub min_rear_gap: f64,
}

impl Default for MobilParams {
    fn default() -> Self {
        Self {
            politeness: 0.2,
            threshold: 0.2,
            safe_decel: 1.0,
            min_front_gap: 8.0,
            min_rear_gap: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LateralParams {
    /// Desired heading per metre of lateral error (rad/m).
    pub offset_gain: f64,
    /// Yaw rate per radian of heading error (1/s).
    pub heading_gain: f64,
    pub max_heading: f64,
    pub max_turn_rate: f64,
    /// Seconds of lateral motion projected to detect a lane change in progress.
    pub lookahead: f64,
    /// Lane-keeping tolerance on lane offset before MOBIL is consulted.
    pub settle_offset: f64,
    pub settle_heading: f64,
}

impl Default for LateralParams {
    fn default() -> Self {
        Self {
            offset_gain: 0.012,
            heading_gain: 1.5,
            max_heading: 0.05,
            max_turn_rate: 0.15,
            lookahead: 3.0,
            settle_offset: 0.3,
            settle_heading: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpertParams {
    pub idm: IdmParams,
    pub mobil: MobilParams,
    pub lateral: LateralParams,
    pub accel_min: f64,
    pub accel_max: f64,
    /// Relative per-vehicle jitter applied to the IDM constants.
    pub jitter: f64,
    /// Vehicles whose lateral distance is below `corridor * lane_width`
    /// count as being in the same lane for car following.
    pub corridor: f64,
}

impl Default for ExpertParams {
    fn default() -> Self {
        Self {
            idm: IdmParams::default(),
            mobil: MobilParams::default(),
            lateral: LateralParams::default(),
            accel_min: -2.0,
            accel_max: 1.5,
            jitter: 0.1,
            corridor: 0.8,
        }
    }
}

impl ExpertParams {
    /// Copy with the IDM constants scaled by independent factors drawn from
    /// `[1 - jitter, 1 + jitter]`.
    pub fn jittered(&self, rng: &mut crate::Rng) -> Self {
        let mut p = *self;
        let j = self.jitter;
        let mut f = |v: &mut f64| {
            if j > 0.0 {
                *v *= 1.0 + rng.random_range(-j..j);
            }
        };
        f(&mut p.idm.desired_speed);
        f(&mut p.idm.time_headway);
        f(&mut p.idm.max_accel);
        f(&mut p.idm.comfort_decel);
        f(&mut p.idm.min_gap);
        p
    }
}

/// IDM acceleration for a vehicle at `speed` following a leader
/// `(bumper_gap, leader_speed)`, or on a free road.
pub fn idm_accel(p: &IdmParams, speed: f64, leader: Option<(f64, f64)>) -> f64 {
    let free = 1.0 - powi(speed / p.desired_speed, p.exponent as i32);
    let interaction = match leader {
        Some((gap, lead_speed)) => {
            let dv = speed - lead_speed;
            let s_star = p.min_gap
                + (speed * p.time_headway + speed * dv / (2.0 * sqrt(p.max_accel * p.comfort_decel)))
                    .max(0.0);
            let s = gap.max(0.1);
            (s_star / s) * (s_star / s)
        }
        None => 0.0,
    };
    p.max_accel * (free - interaction)
}

fn gap_between(rear: &VehicleState, front: &VehicleState) -> f64 {
    front.x - rear.x - (rear.length + front.length) / 2.0
}

/// Nearest vehicle ahead of (or behind) `ego` whose lateral position is
/// within `half_band` of `y_center`.
fn nearest_in_band(
    scene: &Scene,
    ego: &VehicleState,
    y_center: f64,
    half_band: f64,
    ahead: bool,
) -> Option<usize> {
    let mut best: Option<(f64, u32, usize)> = None;
    for (j, o) in scene.vehicles.iter().enumerate() {
        if o.id == ego.id || (o.y - y_center).abs() >= half_band || is_ahead(ego, o) != ahead {
            continue;
        }
        let key = ((o.x - ego.x).abs(), o.id);
        if best.is_none_or(|(d, id, _)| key.0 < d || (key.0 == d && key.1 < id)) {
            best = Some((key.0, key.1, j));
        }
    }
    best.map(|b| b.2)
}

fn follow(p: &IdmParams, rear: &VehicleState, front: Option<&VehicleState>) -> f64 {
    idm_accel(p, rear.speed, front.map(|f| (gap_between(rear, f), f.speed)))
}

/// MOBIL incentive for moving `vehicle_id` into `target_lane`, or `None` when
/// the lane does not exist or the change is unsafe. Neighbours are evaluated
/// with the ego vehicle's IDM constants.
pub fn mobil_incentive(
    scene: &Scene,
    vehicle_id: u32,
    target_lane: isize,
    params: &ExpertParams,
) -> Result<Option<f64>> {
    let ego = scene.vehicle(vehicle_id)?;
    if target_lane < 0 || target_lane as usize >= scene.road.lane_count {
        return Ok(None);
    }
    let band = params.corridor * scene.road.lane_width;
    let yc = scene.road.lane_center(target_lane as usize);
    let v = |j: Option<usize>| j.map(|j| &scene.vehicles[j]);
    let new_leader = v(nearest_in_band(scene, ego, yc, band, true));
    let new_follower = v(nearest_in_band(scene, ego, yc, band, false));
    let old_leader = v(nearest_in_band(scene, ego, ego.y, band, true));
    let old_follower = v(nearest_in_band(scene, ego, ego.y, band, false));
    let m = &params.mobil;
    let idm = &params.idm;

    if let Some(nl) = new_leader {
        if gap_between(ego, nl) < m.min_front_gap {
            return Ok(None);
        }
    }
    let mut follower_gain = 0.0;
    if let Some(nf) = new_follower {
        if gap_between(nf, ego) < m.min_rear_gap {
            return Ok(None);
        }
        let after = follow(idm, nf, Some(ego));
        if after < -m.safe_decel {
            return Ok(None);
        }
        follower_gain += after - follow(idm, nf, new_leader);
    }
    if let Some(of) = old_follower {
        follower_gain += follow(idm, of, old_leader) - follow(idm, of, Some(ego));
    }
    let ego_gain = follow(idm, ego, new_leader) - follow(idm, ego, old_leader);
    Ok(Some(ego_gain + m.politeness * follower_gain))
}

/// Lane the expert is steering towards.
fn target_lane(scene: &Scene, ego: &VehicleState, params: &ExpertParams) -> Result<usize> {
    let road = &scene.road;
    let lat = &params.lateral;
    let lane = ego.lane_index;
    let projected = road.lane_of(ego.y + ego.speed * sin(ego.heading) * lat.lookahead);
    if projected != lane {
        // Manoeuvre in progress: keep going, one lane at a time.
        return Ok(if projected > lane { lane + 1 } else { lane - 1 });
    }
    let offset = ego.y - road.lane_center(lane);
    if offset.abs() >= lat.settle_offset || ego.heading.abs() >= lat.settle_heading {
        return Ok(lane);
    }
    let mut best: Option<(f64, usize)> = None;
    for cand in [lane as isize + 1, lane as isize - 1] {
        if let Some(gain) = mobil_incentive(scene, ego.id, cand, params)? {
            if gain > params.mobil.threshold && best.is_none_or(|(g, _)| gain > g) {
                best = Some((gain, cand as usize));
            }
        }
    }
    Ok(best.map_or(lane, |b| b.1))
}

/// Expert action for one vehicle; deterministic in the scene.
pub fn expert_action(scene: &Scene, vehicle_id: u32, params: &ExpertParams) -> Result<Action> {
    let ego = scene.vehicle(vehicle_id)?;
    let road = &scene.road;
    let band = params.corridor * road.lane_width;
    let target = target_lane(scene, ego, params)?;

    let leader = nearest_in_band(scene, ego, ego.y, band, true).map(|j| &scene.vehicles[j]);
    let mut accel = follow(&params.idm, ego, leader);
    if target != ego.lane_index {
        let yc = road.lane_center(target);
        let next = nearest_in_band(scene, ego, yc, band, true).map(|j| &scene.vehicles[j]);
        accel = accel.min(follow(&params.idm, ego, next));
    }
    let accel = clamp(accel, params.accel_min, params.accel_max);

    let lat = &params.lateral;
    let error = road.lane_center(target) - ego.y;
    let desired_heading = clamp(lat.offset_gain * error, -lat.max_heading, lat.max_heading);
    let turn_rate = clamp(
        lat.heading_gain * (desired_heading - ego.heading),
        -lat.max_turn_rate,
        lat.max_turn_rate,
    );
    Ok(Action { accel, turn_rate })
}

/// Expert controller with per-vehicle jittered constants, indexed by id.
#[derive(Debug, Clone)]
pub struct ExpertController {
    params: Vec<ExpertParams>,
}

impl ExpertController {
    /// Draws jittered constants for vehicle ids `0..n_vehicles`.
    pub fn new(base: &ExpertParams, n_vehicles: usize, seed: u64) -> Self {
        let mut rng = seeded_rng(seed ^ 0x9e37_79b9_7f4a_7c15);
        Self {
            params: (0..n_vehicles).map(|_| base.jittered(&mut rng)).collect(),
        }
    }

    pub fn uniform(base: &ExpertParams, n_vehicles: usize) -> Self {
        Self {
            params: alloc::vec![*base; n_vehicles],
        }
    }

    pub fn params(&self, id: u32) -> &ExpertParams {
        &self.params[id as usize % self.params.len()]
    }
}

impl Controller for ExpertController {
    fn act(&mut self, scene: &Scene, vehicle_id: u32, _obs: &Observation) -> Result<Action> {
        expert_action(scene, vehicle_id, self.params(vehicle_id))
    }
}
