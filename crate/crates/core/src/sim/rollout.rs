use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::observe::{observe, safety_readout, Observation};
use super::{step, Action, SafetyReadout, Scene, SimConfig, VehicleState};
use crate::{Error, Result};

/// Anything that can drive a vehicle.
pub trait Controller {
    fn act(&mut self, scene: &Scene, vehicle_id: u32, obs: &Observation) -> Result<Action>;
}

/// Always returns the zero action: constant speed, constant heading.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroController;

impl Controller for ZeroController {
    fn act(&mut self, _: &Scene, _: u32, _: &Observation) -> Result<Action> {
        Ok(Action::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Expert,
    Policy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RolloutMode {
    AllExpert,
    /// The first `k` vehicles (scene order) are driven by the policy, the
    /// rest by experts.
    ReplaceAgents(usize),
}

/// What one vehicle saw and did at one step. `state` and `readout` are taken
/// before `action` is applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub observation: Observation,
    pub action: Action,
    pub state: VehicleState,
    pub readout: SafetyReadout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub vehicle_id: u32,
    pub controller: ControllerKind,
    pub records: Vec<StepRecord>,
}

/// Simulate `horizon` steps from `scene`, recording one trajectory per
/// vehicle (all vehicles are controlled by either the expert or the policy).
///
/// Recorded actions are the clamped actions actually applied.
pub fn rollout(
    scene: &Scene,
    horizon: usize,
    config: &SimConfig,
    expert: &mut dyn Controller,
    policy: &mut dyn Controller,
    mode: RolloutMode,
) -> Result<Vec<Trajectory>> {
    if horizon == 0 {
        return Err(Error::Config("rollout horizon must be >= 1".into()));
    }
    let n = scene.vehicles.len();
    let replaced = match mode {
        RolloutMode::AllExpert => 0,
        RolloutMode::ReplaceAgents(k) => k.min(n),
    };
    let mut trajectories: Vec<Trajectory> = scene
        .vehicles
        .iter()
        .enumerate()
        .map(|(i, v)| Trajectory {
            vehicle_id: v.id,
            controller: if i < replaced {
                ControllerKind::Policy
            } else {
                ControllerKind::Expert
            },
            records: Vec::with_capacity(horizon),
        })
        .collect();

    let mut current = scene.clone();
    let mut actions = Vec::with_capacity(n);
    for t in 0..horizon {
        actions.clear();
        for (i, traj) in trajectories.iter_mut().enumerate() {
            let state = current.vehicles[i];
            let obs = observe(&current, state.id, config.sensor_range)?;
            let readout = safety_readout(&current, state.id)?;
            let raw = match traj.controller {
                ControllerKind::Expert => expert.act(&current, state.id, &obs)?,
                ControllerKind::Policy => policy.act(&current, state.id, &obs)?,
            };
            if !raw.is_finite() {
                return Err(Error::NonFiniteAction { vehicle: state.id });
            }
            let action = config.bounds.clamp(raw);
            traj.records.push(StepRecord {
                t,
                observation: obs,
                action,
                state,
                readout,
            });
            actions.push(action);
        }
        current = step(&current, &actions, config.dt, &config.bounds)?;
    }
    Ok(trajectories)
}
