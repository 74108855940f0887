//! The adversarial training loop: roll out the shared policy on every agent,
//! score each transition with the critic minus the penalty, take one trust
//! region step on the pooled batch, then update the critic.

mod highway;
mod synthetic;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng as _, RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

pub use highway::{
    critic_action, derive_seed, evaluate, generate_demos, paired_rollout, policy_features, sample_action,
    DemoScene, EvalDriver, HighwayEnv, PairedEvaluation, PolicyController, ACTION_DIM,
};
pub use synthetic::LaneOffsetTask;

use crate::critic::{critic_update, CriticParams, SaBatch};
use crate::math::fingerprint;
use crate::numerics::{MlpSpec, MlpWorkspace};
use crate::penalty::{events, penalty, PenaltyConfig};
use crate::policy::PolicyParams;
use crate::sim::SafetyReadout;
use crate::trpo::{compute_advantages, trpo_step, AgentSegment, LinearBaseline, TrpoConfig};
use crate::{seeded_rng, Error, Result, Rng};

/// One policy-controlled step as seen by the trainer.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyStep {
    /// Policy input features.
    pub features: Vec<f64>,
    /// Unclamped sample in policy units.
    pub action: Vec<f64>,
    pub log_prob: f64,
    /// Applied action in the units the critic sees.
    pub critic_action: Vec<f64>,
    /// Safety state before the action.
    pub readout: SafetyReadout,
}

/// A task the shared policy can be trained on.
pub trait Environment {
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Number of distinct initial scenes available for training rollouts.
    fn scene_count(&self) -> usize;
    /// Roll the shared policy out from scene `scene`, returning one episode
    /// per policy-controlled agent. `agents` caps how many agents the policy
    /// drives.
    fn run_policy(
        &self,
        policy: &PolicyParams,
        scene: usize,
        agents: Option<usize>,
        rng: &mut Rng,
    ) -> Result<Vec<Vec<PolicyStep>>>;
}

/// Expert `(features, action)` pairs pooled over agents and scenes.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoBuffer {
    pub pairs: SaBatch,
    pub source: String,
}

impl DemoBuffer {
    pub fn new(pairs: SaBatch, source: impl Into<String>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyBatch("demonstrations"));
        }
        Ok(Self {
            pairs,
            source: source.into(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumStage {
    pub from_iteration: usize,
    pub agents: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainerConfig {
    pub iterations: usize,
    pub rollouts_per_iteration: usize,
    pub policy_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub init_log_std: f64,
    pub critic_clip: f64,
    pub critic_learn_rate: f64,
    pub critic_steps: usize,
    pub critic_batch: usize,
    pub checkpoint_interval: usize,
    pub telemetry_capacity: usize,
    pub curriculum: Vec<CurriculumStage>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            rollouts_per_iteration: 2,
            policy_hidden: vec![32, 32],
            critic_hidden: vec![32, 32],
            init_log_std: -0.7,
            critic_clip: 0.01,
            critic_learn_rate: 0.05,
            critic_steps: 1,
            critic_batch: 1000,
            checkpoint_interval: 100,
            telemetry_capacity: 100_000,
            curriculum: Vec::new(),
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.rollouts_per_iteration == 0 {
            return bad("rollouts_per_iteration must be >= 1");
        }
        if self.critic_batch == 0 {
            return bad("critic_batch must be >= 1");
        }
        if !(self.critic_clip > 0.0 && self.critic_clip.is_finite()) {
            return bad("critic_clip must be positive");
        }
        if !(self.critic_learn_rate >= 0.0 && self.critic_learn_rate.is_finite()) {
            return bad("critic_learn_rate must be >= 0");
        }
        if !(crate::policy::LOG_STD_MIN..=crate::policy::LOG_STD_MAX).contains(&self.init_log_std) {
            return bad("init_log_std out of range");
        }
        if self.telemetry_capacity == 0 {
            return bad("telemetry_capacity must be >= 1");
        }
        if self.policy_hidden.contains(&0) || self.critic_hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        if self.curriculum.windows(2).any(|w| w[0].from_iteration >= w[1].from_iteration) {
            return bad("curriculum stages must have increasing from_iteration");
        }
        Ok(())
    }

    pub fn policy_spec(&self, obs_dim: usize, action_dim: usize) -> Result<MlpSpec> {
        let mut w = vec![obs_dim];
        w.extend_from_slice(&self.policy_hidden);
        w.push(action_dim);
        MlpSpec::new(w)
    }

    pub fn critic_spec(&self, obs_dim: usize, action_dim: usize) -> Result<MlpSpec> {
        let mut w = vec![obs_dim + action_dim];
        w.extend_from_slice(&self.critic_hidden);
        w.push(1);
        MlpSpec::new(w)
    }

    fn agents_at(&self, iteration: usize) -> Option<usize> {
        self.curriculum
            .iter()
            .take_while(|s| s.from_iteration <= iteration)
            .last()
            .map(|s| s.agents)
    }
}

/// Serializable snapshot of the trainer RNG.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos_hi: u64,
    pub word_pos_lo: u64,
}

impl RngState {
    pub fn capture(rng: &Rng) -> Self {
        let pos = rng.get_word_pos();
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos_hi: (pos >> 64) as u64,
            word_pos_lo: pos as u64,
        }
    }

    pub fn restore(&self) -> Rng {
        let mut rng = Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(((self.word_pos_hi as u128) << 64) | self.word_pos_lo as u128);
        rng
    }
}

/// One row per training iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Telemetry {
    pub iteration: usize,
    pub transitions: usize,
    pub critic_objective: f64,
    pub mean_critic_score: f64,
    pub mean_surrogate_reward: f64,
    pub mean_penalty: f64,
    /// Mean KL of the accepted step, 0 when the step was rejected.
    pub mean_kl: f64,
    /// Event steps per policy transition.
    pub collision_rate: f64,
    pub offroad_rate: f64,
    pub hard_brake_rate: f64,
    pub trpo_accepted: bool,
    pub surrogate_before: f64,
    pub surrogate_after: f64,
    pub backtracks: usize,
    pub policy_fingerprint_before: u64,
    pub policy_fingerprint_after: u64,
    pub policy_updates: usize,
    pub critic_updates: usize,
    pub log_std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub iteration: usize,
    pub policy: PolicyParams,
    pub critic: CriticParams,
    pub rng: RngState,
    /// Most recent rows, oldest first, capped at the configured capacity.
    pub telemetry: Vec<Telemetry>,
}

impl TrainState {
    pub fn initial(obs_dim: usize, action_dim: usize, config: &TrainerConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seeded_rng(seed);
        let policy = PolicyParams::init(config.policy_spec(obs_dim, action_dim)?, &mut rng, config.init_log_std)?;
        let critic = CriticParams::init(config.critic_spec(obs_dim, action_dim)?, &mut rng, config.critic_clip)?;
        Ok(Self {
            iteration: 0,
            policy,
            critic,
            rng: RngState::capture(&rng),
            telemetry: Vec::new(),
        })
    }

    pub fn last_telemetry(&self) -> Option<&Telemetry> {
        self.telemetry.last()
    }
}

/// Callbacks invoked by [`train`]; checkpoint and telemetry persistence
/// hang off these.
pub trait TrainObserver {
    fn on_iteration(&mut self, _state: &TrainState) -> Result<()> {
        Ok(())
    }
    fn on_checkpoint(&mut self, _state: &TrainState) -> Result<()> {
        Ok(())
    }
}

impl TrainObserver for () {}

/// Everything the loop needs besides the environment and the demos.
#[derive(Debug, Clone, Copy)]
pub struct TrainSettings<'a> {
    pub trainer: &'a TrainerConfig,
    pub trpo: &'a TrpoConfig,
    pub penalty: &'a PenaltyConfig,
}

/// Run the configured number of iterations from a fresh state.
pub fn train(
    env: &dyn Environment,
    settings: TrainSettings<'_>,
    demos: &DemoBuffer,
    seed: u64,
    observer: &mut dyn TrainObserver,
) -> Result<TrainState> {
    let state = TrainState::initial(env.obs_dim(), env.action_dim(), settings.trainer, seed)?;
    resume(env, settings, demos, state, observer)
}

/// Continue `state` until `settings.trainer.iterations` is reached.
pub fn resume(
    env: &dyn Environment,
    settings: TrainSettings<'_>,
    demos: &DemoBuffer,
    mut state: TrainState,
    observer: &mut dyn TrainObserver,
) -> Result<TrainState> {
    settings.trainer.validate()?;
    settings.trpo.validate()?;
    settings.penalty.validate()?;
    if demos.pairs.is_empty() {
        return Err(Error::EmptyBatch("demonstrations"));
    }
    Error::check_dim("demonstration width", env.obs_dim() + env.action_dim(), demos.pairs.width())?;
    if env.scene_count() == 0 {
        return Err(Error::EmptyBatch("training scenes"));
    }
    while state.iteration < settings.trainer.iterations {
        state = iterate(env, settings, demos, state)?;
        observer.on_iteration(&state)?;
        let every = settings.trainer.checkpoint_interval;
        if every > 0 && state.iteration % every == 0 {
            observer.on_checkpoint(&state)?;
        }
    }
    Ok(state)
}

/// One full iteration of the training loop.
pub fn iterate(
    env: &dyn Environment,
    settings: TrainSettings<'_>,
    demos: &DemoBuffer,
    state: TrainState,
) -> Result<TrainState> {
    let TrainSettings { trainer, trpo, penalty: pen } = settings;
    let mut rng = state.rng.restore();
    let agents = trainer.agents_at(state.iteration);

    let mut episodes = Vec::new();
    for _ in 0..trainer.rollouts_per_iteration {
        let scene = rng.random_range(0..env.scene_count());
        let mut r = seeded_rng(rng.next_u64());
        episodes.extend(env.run_policy(&state.policy, scene, agents, &mut r)?);
    }

    let critic = &state.critic;
    let mut ws = MlpWorkspace::new(critic.spec());
    let mut policy_pairs = SaBatch::new(env.obs_dim(), env.action_dim());
    let mut segments = Vec::with_capacity(episodes.len());
    let (mut score_sum, mut pen_sum) = (0.0, 0.0);
    let (mut coll, mut off, mut brake, mut n) = (0usize, 0usize, 0usize, 0usize);
    let mut input = Vec::new();
    for ep in &episodes {
        let mut seg = AgentSegment::default();
        for s in ep {
            input.clear();
            input.extend_from_slice(&s.features);
            input.extend_from_slice(&s.critic_action);
            let score = ws.forward(critic.spec(), critic.params().as_slice(), &input)?[0];
            let p = penalty(&s.readout, pen);
            let e = events(&s.readout, pen);
            coll += e.collision as usize;
            off += e.offroad as usize;
            brake += e.hard_brake as usize;
            n += 1;
            score_sum += score;
            pen_sum += p;
            policy_pairs.push(&s.features, &s.critic_action);
            seg.observations.push(s.features.clone());
            seg.actions.push(s.action.clone());
            seg.rewards.push(score - p);
            seg.log_probs.push(s.log_prob);
        }
        segments.push(seg);
    }
    if n == 0 {
        return Err(Error::EmptyBatch("policy rollouts"));
    }

    let baseline = LinearBaseline::fit(&segments, trpo.gamma, trpo.baseline_ridge)?;
    let batch = compute_advantages(&segments, &baseline, trpo)?;
    let outcome = trpo_step(&state.policy, &batch, trpo)?;
    let before = fingerprint(&state.policy.flat());
    let after = fingerprint(&outcome.policy.flat());

    let mut next_critic = state.critic.clone();
    let mut objective = 0.0;
    for _ in 0..trainer.critic_steps {
        let e = demos.pairs.sample(trainer.critic_batch, &mut rng);
        let p = policy_pairs.sample(trainer.critic_batch, &mut rng);
        next_critic = critic_update(&next_critic, &e, &p, trainer.critic_learn_rate)?;
        objective = next_critic.objective(&e, &p)?;
    }

    let nf = n as f64;
    let row = Telemetry {
        iteration: state.iteration,
        transitions: n,
        critic_objective: objective,
        mean_critic_score: score_sum / nf,
        mean_surrogate_reward: (score_sum - pen_sum) / nf,
        mean_penalty: pen_sum / nf,
        mean_kl: if outcome.report.accepted { outcome.report.kl } else { 0.0 },
        collision_rate: coll as f64 / nf,
        offroad_rate: off as f64 / nf,
        hard_brake_rate: brake as f64 / nf,
        trpo_accepted: outcome.report.accepted,
        surrogate_before: outcome.report.surrogate_before,
        surrogate_after: outcome.report.surrogate_after,
        backtracks: outcome.report.backtracks,
        policy_fingerprint_before: before,
        policy_fingerprint_after: after,
        policy_updates: outcome.report.accepted as usize,
        critic_updates: trainer.critic_steps,
        log_std: outcome.policy.log_std().to_vec(),
    };
    let mut telemetry = state.telemetry;
    telemetry.push(row);
    if telemetry.len() > trainer.telemetry_capacity {
        let excess = telemetry.len() - trainer.telemetry_capacity;
        telemetry.drain(..excess);
    }
    Ok(TrainState {
        iteration: state.iteration + 1,
        policy: outcome.policy,
        critic: next_critic,
        rng: RngState::capture(&rng),
        telemetry,
    })
}
