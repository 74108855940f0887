//! Reward-augmentation penalties and the undesired set `U`.
//!
//! Three events are penalized: collision (`d_c = 0`), off-road driving
//! (`d_road <= -0.1 m`), and hard braking (`a <= -3 m/s^2`). Collision and
//! off-road cost `R`, hard braking `R / 2`, and simultaneous events are
//! combined by taking the maximum. The smooth variant ramps the off-road and
//! braking terms linearly up to their event thresholds; collision stays
//! binary in both modes.
//!
//! The trigger thresholds here are the single source of truth for event
//! detection; the metrics module calls [`events`] rather than re-deriving
//! them.

use serde::{Deserialize, Serialize};

use crate::sim::SafetyReadout;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyMode {
    /// No augmentation: plain parameter-shared adversarial imitation.
    None,
    Binary,
    Smooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenaltyConfig {
    pub mode: PenaltyMode,
    /// Penalty magnitude `R`.
    pub magnitude: f64,
    /// Collision when `d_c <= collision_threshold` (metres).
    pub collision_threshold: f64,
    /// Off-road when `d_road <= offroad_threshold` (metres).
    pub offroad_threshold: f64,
    /// Hard brake when `accel <= hard_brake_threshold` (m/s^2).
    pub hard_brake_threshold: f64,
    /// Smooth off-road ramp starts at this `d_road`.
    pub smooth_offroad_start: f64,
    /// Smooth brake ramp starts at this acceleration.
    pub smooth_brake_start: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            mode: PenaltyMode::Binary,
            magnitude: 2000.0,
            collision_threshold: 0.0,
            offroad_threshold: -0.1,
            hard_brake_threshold: -3.0,
            smooth_offroad_start: 0.5,
            smooth_brake_start: -2.0,
        }
    }
}

impl PenaltyConfig {
    /// Binary penalty with `R = 2000`.
    pub fn binary() -> Self {
        Self::default()
    }

    /// Smooth penalty with `R = 1000`.
    pub fn smooth() -> Self {
        Self {
            mode: PenaltyMode::Smooth,
            magnitude: 1000.0,
            ..Self::default()
        }
    }

    pub fn disabled() -> Self {
        Self {
            mode: PenaltyMode::None,
            magnitude: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.magnitude >= 0.0 && self.magnitude.is_finite()) {
            return Err(Error::Config("penalty magnitude must be finite and >= 0".into()));
        }
        if !(self.smooth_offroad_start > self.offroad_threshold) {
            return Err(Error::Config(
                "smooth off-road ramp must start before the off-road threshold".into(),
            ));
        }
        if !(self.smooth_brake_start > self.hard_brake_threshold) {
            return Err(Error::Config(
                "smooth brake ramp must start before the hard-brake threshold".into(),
            ));
        }
        Ok(())
    }
}

/// Which binary triggers fire for one readout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Events {
    pub collision: bool,
    pub offroad: bool,
    pub hard_brake: bool,
}

impl Events {
    pub fn any(&self) -> bool {
        self.collision || self.offroad || self.hard_brake
    }
}

pub fn events(readout: &SafetyReadout, config: &PenaltyConfig) -> Events {
    Events {
        collision: readout.d_c <= config.collision_threshold,
        offroad: readout.d_road <= config.offroad_threshold,
        hard_brake: readout.accel <= config.hard_brake_threshold,
    }
}

/// `(s, a) in U`: any binary trigger fires. Independent of the penalty mode.
pub fn in_undesired_set(readout: &SafetyReadout, config: &PenaltyConfig) -> bool {
    events(readout, config).any()
}

pub fn binary_penalty(readout: &SafetyReadout, config: &PenaltyConfig) -> f64 {
    let r = config.magnitude;
    let e = events(readout, config);
    if e.collision || e.offroad {
        r
    } else if e.hard_brake {
        r / 2.0
    } else {
        0.0
    }
}

/// Linear ramp from 0 at `start` to 1 at `end`, clamped to `[0, 1]`.
fn ramp(value: f64, start: f64, end: f64) -> f64 {
    crate::math::clamp((start - value) / (start - end), 0.0, 1.0)
}

pub fn smooth_penalty(readout: &SafetyReadout, config: &PenaltyConfig) -> f64 {
    let r = config.magnitude;
    let collision = if readout.d_c <= config.collision_threshold {
        r
    } else {
        0.0
    };
    let offroad = r * ramp(
        readout.d_road,
        config.smooth_offroad_start,
        config.offroad_threshold,
    );
    let brake = 0.5
        * r
        * ramp(
            readout.accel,
            config.smooth_brake_start,
            config.hard_brake_threshold,
        );
    collision.max(offroad).max(brake)
}

/// Penalty according to `config.mode`.
pub fn penalty(readout: &SafetyReadout, config: &PenaltyConfig) -> f64 {
    match config.mode {
        PenaltyMode::None => 0.0,
        PenaltyMode::Binary => binary_penalty(readout, config),
        PenaltyMode::Smooth => smooth_penalty(readout, config),
    }
}
