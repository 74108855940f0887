use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{DemoBuffer, Environment, PolicyStep};
use crate::critic::SaBatch;
use crate::math::clamp;
use crate::policy::PolicyParams;
use crate::sim::SafetyReadout;
use crate::{seeded_rng, Result, Rng};

/// One-dimensional lane-keeping task. Each agent's state is a lateral offset
/// `y`; the action is a lateral velocity clamped to `[-1, 1]`. Experts steer
/// toward `target` with a proportional law. Agents do not interact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LaneOffsetTask {
    pub agents: usize,
    pub horizon: usize,
    pub dt: f64,
    pub target: f64,
    pub gain: f64,
    /// Initial offsets are uniform on `[-spread, spread]`.
    pub spread: f64,
    pub scenes: usize,
}

impl Default for LaneOffsetTask {
    fn default() -> Self {
        Self {
            agents: 10,
            horizon: 60,
            dt: 0.1,
            target: 0.5,
            gain: 1.5,
            spread: 1.0,
            scenes: 64,
        }
    }
}

const QUIET: SafetyReadout = SafetyReadout {
    d_c: f64::INFINITY,
    d_road: 10.0,
    accel: 0.0,
};

impl LaneOffsetTask {
    fn initial_offsets(&self, scene: usize) -> Vec<f64> {
        let mut rng = seeded_rng(super::derive_seed(0x5eed, scene as u64));
        (0..self.agents).map(|_| rng.random_range(-self.spread..=self.spread)).collect()
    }

    pub fn expert_action(&self, y: f64) -> f64 {
        clamp(self.gain * (self.target - y), -1.0, 1.0)
    }

    /// Expert `(y, u)` pairs over every training scene.
    pub fn demos(&self) -> Result<DemoBuffer> {
        let mut pairs = SaBatch::new(1, 1);
        for scene in 0..self.scenes {
            for mut y in self.initial_offsets(scene) {
                for _ in 0..self.horizon {
                    let u = self.expert_action(y);
                    pairs.push(&[y], &[u]);
                    y += u * self.dt;
                }
            }
        }
        DemoBuffer::new(pairs, "lane-offset experts")
    }

    /// Mean `|y - target|` over the second half of every episode, using the
    /// policy mean, over `episodes` fresh initial offsets drawn from `seed`.
    pub fn offset_error(&self, policy: &PolicyParams, episodes: usize, seed: u64) -> Result<f64> {
        let mut rng = seeded_rng(seed);
        let (mut sum, mut n) = (0.0, 0usize);
        for _ in 0..episodes {
            let mut y: f64 = rng.random_range(-self.spread..=self.spread);
            for t in 0..self.horizon {
                if t >= self.horizon / 2 {
                    sum += (y - self.target).abs();
                    n += 1;
                }
                let u = clamp(policy.mean(&[y])?[0], -1.0, 1.0);
                y += u * self.dt;
            }
        }
        Ok(sum / n.max(1) as f64)
    }
}

impl Environment for LaneOffsetTask {
    fn obs_dim(&self) -> usize {
        1
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn scene_count(&self) -> usize {
        self.scenes
    }

    fn run_policy(
        &self,
        policy: &PolicyParams,
        scene: usize,
        agents: Option<usize>,
        rng: &mut Rng,
    ) -> Result<Vec<Vec<PolicyStep>>> {
        let mut ys = self.initial_offsets(scene);
        ys.truncate(agents.unwrap_or(self.agents));
        let mut out = vec![Vec::with_capacity(self.horizon); ys.len()];
        for _ in 0..self.horizon {
            for (y, ep) in ys.iter_mut().zip(out.iter_mut()) {
                let (raw, log_prob) = policy.sample(&[*y], rng)?;
                let u = clamp(raw[0], -1.0, 1.0);
                ep.push(PolicyStep {
                    features: vec![*y],
                    action: raw,
                    log_prob,
                    critic_action: vec![u],
                    readout: QUIET,
                });
                *y += u * self.dt;
            }
        }
        Ok(out)
    }
}
