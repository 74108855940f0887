//! Multi-lane straight-highway simulator.
//!
//! The road runs along `+x`; lateral position `y` is measured from the road
//! centreline with `+y` to the left. Lane 0 is the rightmost lane. Vehicles
//! follow unicycle kinematics driven by `(accel, turn_rate)` actions at a
//! fixed step (10 Hz by default).

mod expert;
mod geometry;
mod observe;
mod rollout;
mod scene;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use expert::{
    expert_action, idm_accel, mobil_incentive, ExpertController, ExpertParams, IdmParams,
    LateralParams, MobilParams,
};
pub use geometry::{rectangle_gap, Rect};
pub use observe::{observe, safety_readout, Observation, OBSERVATION_DIM, SLOT_NAMES};
pub use rollout::{
    rollout, Controller, ControllerKind, RolloutMode, StepRecord, Trajectory, ZeroController,
};
pub use scene::{sample_initial_scene, step};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadSpec {
    pub lane_count: usize,
    /// Metres.
    pub lane_width: f64,
    /// Length of the section used for initial placement, metres.
    pub length: f64,
}

impl RoadSpec {
    pub fn half_width(&self) -> f64 {
        self.lane_count as f64 * self.lane_width / 2.0
    }

    pub fn lane_center(&self, lane: usize) -> f64 {
        -self.half_width() + (lane as f64 + 0.5) * self.lane_width
    }

    /// Lane containing lateral position `y`, clamped onto the road.
    pub fn lane_of(&self, y: f64) -> usize {
        let raw = crate::math::floor((y + self.half_width()) / self.lane_width);
        if raw < 0.0 {
            0
        } else {
            (raw as usize).min(self.lane_count - 1)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lane_count == 0 || !(self.lane_width > 0.0) || !(self.length > 0.0) {
            return Err(Error::Config(
                "road needs >= 1 lane and positive lane width and length".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    /// Most recently applied longitudinal acceleration.
    pub accel: f64,
    pub length: f64,
    pub width: f64,
    pub lane_index: usize,
}

impl VehicleState {
    pub fn rect(&self) -> Rect {
        Rect::new(self.x, self.y, self.heading, self.length, self.width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub time_step: usize,
    pub vehicles: Vec<VehicleState>,
    pub road: RoadSpec,
}

impl Scene {
    pub fn index_of(&self, id: u32) -> Result<usize> {
        self.vehicles
            .iter()
            .position(|v| v.id == id)
            .ok_or(Error::UnknownVehicle(id))
    }

    pub fn vehicle(&self, id: u32) -> Result<&VehicleState> {
        Ok(&self.vehicles[self.index_of(id)?])
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.vehicles.iter().map(|v| v.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    /// Longitudinal acceleration, m/s^2.
    pub accel: f64,
    /// Yaw rate, rad/s.
    pub turn_rate: f64,
}

impl Action {
    pub const fn new(accel: f64, turn_rate: f64) -> Self {
        Self { accel, turn_rate }
    }

    pub fn is_finite(&self) -> bool {
        self.accel.is_finite() && self.turn_rate.is_finite()
    }
}

/// Symmetric action limits applied before integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionBounds {
    pub accel: f64,
    pub turn_rate: f64,
}

impl Default for ActionBounds {
    fn default() -> Self {
        Self {
            accel: 4.0,
            turn_rate: 0.15,
        }
    }
}

impl ActionBounds {
    pub fn clamp(&self, a: Action) -> Action {
        use crate::math::clamp;
        Action {
            accel: clamp(a.accel, -self.accel, self.accel),
            turn_rate: clamp(a.turn_rate, -self.turn_rate, self.turn_rate),
        }
    }
}

/// Quantities the penalties are defined on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyReadout {
    /// Smallest gap to any other vehicle; 0 when overlapping.
    pub d_c: f64,
    /// Distance from the vehicle body to the nearest road edge; negative
    /// once it crosses the edge.
    pub d_road: f64,
    pub accel: f64,
}

/// Simulator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub lanes: usize,
    pub lane_width: f64,
    pub road_length: f64,
    pub n_agents: usize,
    pub horizon: usize,
    pub dt: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    /// Minimum bumper-to-bumper gap between same-lane vehicles at t = 0.
    pub min_spacing: f64,
    pub sensor_range: f64,
    pub bounds: ActionBounds,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            lanes: 3,
            lane_width: 3.7,
            road_length: 250.0,
            n_agents: 10,
            horizon: 200,
            dt: 0.1,
            vehicle_length: 4.5,
            vehicle_width: 1.8,
            speed_min: 24.0,
            speed_max: 28.0,
            min_spacing: 25.0,
            sensor_range: 100.0,
            bounds: ActionBounds::default(),
        }
    }
}

impl SimConfig {
    pub fn road(&self) -> RoadSpec {
        RoadSpec {
            lane_count: self.lanes,
            lane_width: self.lane_width,
            length: self.road_length,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.road().validate()?;
        let positive = [
            ("dt", self.dt),
            ("vehicle_length", self.vehicle_length),
            ("vehicle_width", self.vehicle_width),
            ("sensor_range", self.sensor_range),
            ("bounds.accel", self.bounds.accel),
            ("bounds.turn_rate", self.bounds.turn_rate),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(alloc::format!("{name} must be positive")));
            }
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be >= 1".into()));
        }
        if self.vehicle_width >= self.lane_width {
            return Err(Error::Config("vehicles must be narrower than a lane".into()));
        }
        if !(0.0 <= self.speed_min && self.speed_min <= self.speed_max) {
            return Err(Error::Config("need 0 <= speed_min <= speed_max".into()));
        }
        if !(self.min_spacing >= 0.0) {
            return Err(Error::Config("min_spacing must be >= 0".into()));
        }
        Ok(())
    }
}
