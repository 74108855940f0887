use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::{Action, ActionBounds, Scene, SimConfig, VehicleState};
use crate::math::{cos, sin};
use crate::{seeded_rng, Error, Result};

/// Place `config.n_agents` vehicles on the placement section.
///
/// Vehicles are spread round-robin over lanes in shuffled order, centred in
/// their lane and aligned with the road. Within a lane the free length is
/// split by sorted uniform draws, so every same-lane bumper gap is at least
/// `min_spacing`.
pub fn sample_initial_scene(config: &SimConfig, seed: u64) -> Result<Scene> {
    config.validate()?;
    let road = config.road();
    if (config.lane_width - config.vehicle_width) / 2.0 <= 0.5 {
        return Err(Error::Config(
            "lanes too narrow: a centred vehicle must keep more than 0.5 m to the road edge"
                .into(),
        ));
    }
    let mut rng = seeded_rng(seed);
    let n = config.n_agents;
    let mut lanes: Vec<usize> = (0..n).map(|i| i % config.lanes).collect();
    lanes.shuffle(&mut rng);

    let pitch = config.vehicle_length + config.min_spacing;
    let mut vehicles = Vec::with_capacity(n);
    for lane in 0..config.lanes {
        let m = lanes.iter().filter(|&&l| l == lane).count();
        if m == 0 {
            continue;
        }
        let slack = road.length - m as f64 * config.vehicle_length - (m - 1) as f64 * config.min_spacing;
        if slack < 0.0 {
            return Err(Error::Config(alloc::format!(
                "{m} vehicles with spacing {} m do not fit in lane {lane} of a {} m section",
                config.min_spacing,
                road.length
            )));
        }
        let mut offsets: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * slack).collect();
        offsets.sort_by(f64::total_cmp);
        for (k, off) in offsets.into_iter().enumerate() {
            let speed = if config.speed_max > config.speed_min {
                rng.random_range(config.speed_min..config.speed_max)
            } else {
                config.speed_min
            };
            vehicles.push(VehicleState {
                id: 0,
                x: off + k as f64 * pitch + config.vehicle_length / 2.0,
                y: road.lane_center(lane),
                heading: 0.0,
                speed,
                accel: 0.0,
                length: config.vehicle_length,
                width: config.vehicle_width,
                lane_index: lane,
            });
        }
    }
    for (i, v) in vehicles.iter_mut().enumerate() {
        v.id = i as u32;
    }
    Ok(Scene {
        time_step: 0,
        vehicles,
        road,
    })
}

/// Advance every vehicle by one step of unicycle kinematics.
///
/// `actions[i]` drives `scene.vehicles[i]`; actions are clamped to `bounds`
/// first. Speed never goes negative.
pub fn step(scene: &Scene, actions: &[Action], dt: f64, bounds: &ActionBounds) -> Result<Scene> {
    Error::check_dim("actions", scene.vehicles.len(), actions.len())?;
    let mut next = scene.clone();
    next.time_step += 1;
    for (v, a) in next.vehicles.iter_mut().zip(actions) {
        if !a.is_finite() {
            return Err(Error::NonFiniteAction { vehicle: v.id });
        }
        let a = bounds.clamp(*a);
        v.heading += a.turn_rate * dt;
        v.speed = (v.speed + a.accel * dt).max(0.0);
        v.x += v.speed * cos(v.heading) * dt;
        v.y += v.speed * sin(v.heading) * dt;
        v.accel = a.accel;
        v.lane_index = scene.road.lane_of(v.y);
    }
    Ok(next)
}
