//! Top-level experiment configuration.

use serde::{Deserialize, Serialize};

use crate::penalty::{PenaltyConfig, PenaltyMode};
use crate::sim::{ExpertParams, SimConfig};
use crate::trainer::{HighwayEnv, TrainSettings, TrainerConfig};
use crate::trpo::TrpoConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    pub demos: u64,
    pub train: u64,
    pub evaluate: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            demos: 1,
            train: 2,
            evaluate: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub sim: SimConfig,
    pub expert: ExpertParams,
    pub trainer: TrainerConfig,
    pub trpo: TrpoConfig,
    pub penalty: PenaltyConfig,
    pub seeds: Seeds,
    /// Expert scenes recorded by `generate-demos`.
    pub demo_scenes: usize,
    pub eval_rollouts: usize,
    pub output_dir: alloc::string::String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig {
                horizon: 100,
                ..SimConfig::default()
            },
            expert: ExpertParams::default(),
            trainer: TrainerConfig::default(),
            trpo: TrpoConfig::default(),
            penalty: PenaltyConfig::binary(),
            seeds: Seeds::default(),
            demo_scenes: 20,
            eval_rollouts: 50,
            output_dir: "out".into(),
        }
    }
}

impl ExperimentConfig {
    /// Denser, speed-heterogeneous traffic and a critic with room to
    /// separate expert from policy pairs. Used by the end-to-end comparison.
    pub fn desk_scale() -> Self {
        let mut cfg = Self::default();
        cfg.sim.road_length = 200.0;
        cfg.sim.min_spacing = 15.0;
        cfg.sim.speed_min = 22.0;
        cfg.sim.speed_max = 30.0;
        cfg.trainer.critic_clip = 1.0;
        cfg.trainer.critic_learn_rate = 0.1;
        cfg.trainer.critic_steps = 5;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.trainer.validate()?;
        self.trpo.validate()?;
        self.penalty.validate()?;
        if self.demo_scenes == 0 {
            return Err(Error::Config("demo_scenes must be >= 1".into()));
        }
        if !(self.expert.accel_min <= 0.0 && self.expert.accel_max >= 0.0) {
            return Err(Error::Config("expert accel range must contain 0".into()));
        }
        Ok(())
    }

    /// Replace the penalty with the default of the given mode.
    pub fn with_penalty_mode(mut self, mode: PenaltyMode) -> Self {
        self.penalty = match mode {
            PenaltyMode::None => PenaltyConfig::disabled(),
            PenaltyMode::Binary => PenaltyConfig::binary(),
            PenaltyMode::Smooth => PenaltyConfig::smooth(),
        };
        self
    }

    pub fn settings(&self) -> TrainSettings<'_> {
        TrainSettings {
            trainer: &self.trainer,
            trpo: &self.trpo,
            penalty: &self.penalty,
        }
    }

    /// Highway environment over the given initial scenes.
    pub fn highway_env(&self, scenes: alloc::vec::Vec<crate::sim::Scene>) -> HighwayEnv {
        HighwayEnv {
            sim: self.sim,
            expert: self.expert,
            horizon: self.sim.horizon,
            scenes,
        }
    }
}
