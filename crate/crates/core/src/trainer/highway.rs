use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{DemoBuffer, Environment, PolicyStep};
use crate::critic::SaBatch;
use crate::metrics::{build_report, MetricReport};
use crate::penalty::{in_undesired_set, PenaltyConfig};
use crate::policy::PolicyParams;
use crate::sim::{
    rollout, sample_initial_scene, Action, ActionBounds, Controller, ControllerKind, ExpertController,
    ExpertParams, Observation, RolloutMode, Scene, SimConfig, Trajectory, OBSERVATION_DIM,
};
use crate::{seeded_rng, Error, Result, Rng};

pub const ACTION_DIM: usize = 2;

/// Mix a run seed with an index into an independent 64-bit seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fixed affine rescaling of an observation into network inputs.
pub fn policy_features(obs: &Observation, sim: &SimConfig) -> Vec<f64> {
    let o = &obs.0;
    let mut f = Vec::with_capacity(OBSERVATION_DIM);
    f.push((o[0] - 25.0) / 5.0);
    f.push(o[1] / 2.0);
    f.push(o[2] / (sim.lane_width / 2.0));
    f.push(o[3] / 0.05);
    f.push(o[4] / sim.lane_width - 1.0);
    f.push(o[5] / sim.lane_width - 1.0);
    for k in 0..6 {
        let b = 6 + 3 * k;
        f.push(o[b] / 50.0 - 1.0);
        f.push(o[b + 1] / 5.0);
        f.push(o[b + 2]);
    }
    f
}

/// Applied action in critic units (divided by the action bounds).
pub fn critic_action(a: &Action, bounds: &ActionBounds) -> [f64; ACTION_DIM] {
    [a.accel / bounds.accel, a.turn_rate / bounds.turn_rate]
}

fn to_action(raw: &[f64], bounds: &ActionBounds) -> Action {
    Action::new(raw[0] * bounds.accel, raw[1] * bounds.turn_rate)
}

/// Draw a simulator action from the shared policy. The returned log
/// probability refers to the unclamped sample.
pub fn sample_action(policy: &PolicyParams, obs: &Observation, sim: &SimConfig, rng: &mut Rng) -> Result<(Action, f64)> {
    let (raw, lp) = policy.sample(&policy_features(obs, sim), rng)?;
    Ok((to_action(&raw, &sim.bounds), lp))
}

/// Drives vehicles with the shared policy and remembers every sample so the
/// trainer can rebuild its episodes.
pub struct PolicyController<'a> {
    policy: &'a PolicyParams,
    sim: SimConfig,
    rng: Rng,
    deterministic: bool,
    log: BTreeMap<u32, Vec<(Vec<f64>, Vec<f64>, f64)>>,
}

impl<'a> PolicyController<'a> {
    pub fn new(policy: &'a PolicyParams, sim: SimConfig, rng: Rng, deterministic: bool) -> Self {
        Self {
            policy,
            sim,
            rng,
            deterministic,
            log: BTreeMap::new(),
        }
    }

    /// `(features, raw action, log prob)` per step for `vehicle_id`.
    pub fn take_log(&mut self, vehicle_id: u32) -> Vec<(Vec<f64>, Vec<f64>, f64)> {
        self.log.remove(&vehicle_id).unwrap_or_default()
    }
}

impl Controller for PolicyController<'_> {
    fn act(&mut self, _: &Scene, vehicle_id: u32, obs: &Observation) -> Result<Action> {
        let f = policy_features(obs, &self.sim);
        let (raw, lp) = if self.deterministic {
            let m = self.policy.mean(&f)?;
            let lp = self.policy.log_prob(&f, &m)?;
            (m, lp)
        } else {
            self.policy.sample(&f, &mut self.rng)?
        };
        let a = to_action(&raw, &self.sim.bounds);
        self.log.entry(vehicle_id).or_default().push((f, raw, lp));
        Ok(a)
    }
}

/// Highway training task: initial scenes replayed with every agent (or the
/// first `agents`) driven by the shared policy.
#[derive(Debug, Clone)]
pub struct HighwayEnv {
    pub sim: SimConfig,
    pub expert: ExpertParams,
    pub horizon: usize,
    pub scenes: Vec<Scene>,
}

impl Environment for HighwayEnv {
    fn obs_dim(&self) -> usize {
        OBSERVATION_DIM
    }

    fn action_dim(&self) -> usize {
        ACTION_DIM
    }

    fn scene_count(&self) -> usize {
        self.scenes.len()
    }

    fn run_policy(
        &self,
        policy: &PolicyParams,
        scene: usize,
        agents: Option<usize>,
        rng: &mut Rng,
    ) -> Result<Vec<Vec<PolicyStep>>> {
        use rand::RngCore;
        let s = self.scenes.get(scene).ok_or(Error::EmptyBatch("training scenes"))?;
        let n = s.vehicles.len();
        let k = agents.unwrap_or(n).min(n);
        let mut expert = ExpertController::new(&self.expert, n, rng.next_u64());
        let mut pc = PolicyController::new(policy, self.sim, seeded_rng(rng.next_u64()), false);
        let trajs = rollout(s, self.horizon, &self.sim, &mut expert, &mut pc, RolloutMode::ReplaceAgents(k))?;
        let mut out = Vec::with_capacity(k);
        for tr in trajs.iter().filter(|t| t.controller == ControllerKind::Policy) {
            let log = pc.take_log(tr.vehicle_id);
            let steps = tr
                .records
                .iter()
                .zip(log)
                .map(|(r, (features, action, log_prob))| PolicyStep {
                    features,
                    action,
                    log_prob,
                    critic_action: critic_action(&r.action, &self.sim.bounds).to_vec(),
                    readout: r.readout,
                })
                .collect();
            out.push(steps);
        }
        Ok(out)
    }
}

/// One recorded expert scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoScene {
    pub scene_id: u32,
    pub trajectories: Vec<Trajectory>,
}

impl DemoScene {
    /// The scene at the first recorded step.
    pub fn initial_scene(&self, sim: &SimConfig) -> Result<Scene> {
        let vehicles = self
            .trajectories
            .iter()
            .map(|t| t.records.first().map(|r| r.state).ok_or(Error::EmptyBatch("trajectory")))
            .collect::<Result<Vec<_>>>()?;
        Ok(Scene {
            time_step: 0,
            vehicles,
            road: sim.road(),
        })
    }
}

/// Expert rollouts from `scenes` sampled initial scenes.
pub fn generate_demos(sim: &SimConfig, expert: &ExpertParams, scenes: usize, seed: u64) -> Result<Vec<DemoScene>> {
    let mut out = Vec::with_capacity(scenes);
    for i in 0..scenes {
        let scene = sample_initial_scene(sim, derive_seed(seed, 2 * i as u64))?;
        let mut ctl = ExpertController::new(expert, scene.vehicles.len(), derive_seed(seed, 2 * i as u64 + 1));
        let mut unused = crate::sim::ZeroController;
        let trajectories = rollout(&scene, sim.horizon, sim, &mut ctl, &mut unused, RolloutMode::AllExpert)?;
        out.push(DemoScene {
            scene_id: i as u32,
            trajectories,
        });
    }
    Ok(out)
}

impl DemoBuffer {
    /// Pool every expert step; fails if any recorded pair is undesired.
    pub fn from_demos(demos: &[DemoScene], sim: &SimConfig, penalty: &PenaltyConfig) -> Result<Self> {
        let mut pairs = SaBatch::new(OBSERVATION_DIM, ACTION_DIM);
        for d in demos {
            for t in &d.trajectories {
                for r in &t.records {
                    if in_undesired_set(&r.readout, penalty) {
                        return Err(Error::Infeasible(alloc::format!(
                            "demonstration scene {} vehicle {} step {} is in the undesired set",
                            d.scene_id,
                            t.vehicle_id,
                            r.t
                        )));
                    }
                    pairs.push(&policy_features(&r.observation, sim), &critic_action(&r.action, &sim.bounds));
                }
            }
        }
        Self::new(pairs, alloc::format!("{} expert scenes", demos.len()))
    }
}

/// Who drives the replaced vehicles during evaluation.
#[derive(Debug, Clone, Copy)]
pub enum EvalDriver<'a> {
    Expert,
    Policy {
        params: &'a PolicyParams,
        deterministic: bool,
    },
}

/// Expert replay and its policy-driven counterpart from one initial scene.
pub fn paired_rollout(
    driver: EvalDriver<'_>,
    sim: &SimConfig,
    expert: &ExpertParams,
    seed: u64,
) -> Result<(Vec<Trajectory>, Vec<Trajectory>)> {
    let scene = sample_initial_scene(sim, derive_seed(seed, 0))?;
    let n = scene.vehicles.len();
    let expert_seed = derive_seed(seed, 1);
    let mut e1 = ExpertController::new(expert, n, expert_seed);
    let mut zero = crate::sim::ZeroController;
    let reference = rollout(&scene, sim.horizon, sim, &mut e1, &mut zero, RolloutMode::AllExpert)?;
    let mut e2 = ExpertController::new(expert, n, expert_seed);
    let replaced = match driver {
        EvalDriver::Expert => {
            let mut e3 = ExpertController::new(expert, n, expert_seed);
            rollout(&scene, sim.horizon, sim, &mut e2, &mut e3, RolloutMode::ReplaceAgents(n))?
        }
        EvalDriver::Policy { params, deterministic } => {
            let mut pc = PolicyController::new(params, *sim, seeded_rng(derive_seed(seed, 2)), deterministic);
            rollout(&scene, sim.horizon, sim, &mut e2, &mut pc, RolloutMode::ReplaceAgents(n))?
        }
    };
    Ok((reference, replaced))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedEvaluation {
    /// Per rollout: expert replay trajectories.
    pub expert: Vec<Vec<Trajectory>>,
    /// Per rollout: trajectories with every vehicle replaced.
    pub replaced: Vec<Vec<Trajectory>>,
    pub report: MetricReport,
}

impl PairedEvaluation {
    pub fn from_rollouts(
        runs: Vec<(Vec<Trajectory>, Vec<Trajectory>)>,
        sim: &SimConfig,
        penalty: &PenaltyConfig,
    ) -> Result<Self> {
        let (expert, replaced): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
        let pairs: Vec<(&Trajectory, &Trajectory)> = expert
            .iter()
            .zip(&replaced)
            .flat_map(|(e, p)| e.iter().zip(p.iter()))
            .collect();
        let report = build_report(&pairs, expert.len(), &sim.road(), penalty)?;
        Ok(Self {
            expert,
            replaced,
            report,
        })
    }
}

/// `n_rollouts` paired evaluations from independent initial scenes.
pub fn evaluate(
    driver: EvalDriver<'_>,
    sim: &SimConfig,
    expert: &ExpertParams,
    penalty: &PenaltyConfig,
    n_rollouts: usize,
    seed: u64,
) -> Result<PairedEvaluation> {
    let runs = (0..n_rollouts)
        .map(|i| paired_rollout(driver, sim, expert, derive_seed(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    PairedEvaluation::from_rollouts(runs, sim, penalty)
}
