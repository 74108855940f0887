mod support;

use rail_core::config::ExperimentConfig;
use rail_core::metrics::build_report;
use rail_core::penalty::PenaltyConfig;
use rail_core::trainer::{
    evaluate, generate_demos, resume, train, DemoBuffer, EvalDriver, LaneOffsetTask, TrainObserver, TrainSettings,
    TrainState, TrainerConfig,
};
use rail_core::trpo::TrpoConfig;
use support::metrics_oracle::{event_oracle, rmse_oracle, PairedSet};

fn synthetic_config(iterations: usize) -> TrainerConfig {
    TrainerConfig {
        iterations,
        critic_clip: 1.0,
        critic_learn_rate: 0.1,
        critic_steps: 5,
        ..Default::default()
    }
}

fn run_synthetic(iterations: usize, seed: u64) -> TrainState {
    let task = LaneOffsetTask::default();
    let demos = task.demos().unwrap();
    let trainer = synthetic_config(iterations);
    let trpo = TrpoConfig::default();
    let pen = PenaltyConfig::disabled();
    let settings = TrainSettings {
        trainer: &trainer,
        trpo: &trpo,
        penalty: &pen,
    };
    train(&task, settings, &demos, seed, &mut ()).unwrap()
}

#[test]
fn zero_iterations_change_nothing() {
    let state = run_synthetic(0, 4);
    let init = TrainState::initial(1, 1, &synthetic_config(0), 4).unwrap();
    assert_eq!(state, init);
    assert!(state.telemetry.is_empty());
}

#[test]
fn same_seed_same_run_and_resume_is_seamless() {
    let a = run_synthetic(6, 9);
    let b = run_synthetic(6, 9);
    assert_eq!(a, b);
    assert_eq!(a.telemetry.len(), 6);
    let c = run_synthetic(6, 10);
    assert_ne!(a.policy, c.policy);

    let half = run_synthetic(3, 9);
    let task = LaneOffsetTask::default();
    let trainer = synthetic_config(6);
    let trpo = TrpoConfig::default();
    let pen = PenaltyConfig::disabled();
    let settings = TrainSettings {
        trainer: &trainer,
        trpo: &trpo,
        penalty: &pen,
    };
    let resumed = resume(&task, settings, &task.demos().unwrap(), half, &mut ()).unwrap();
    assert_eq!(resumed, a);
}

struct Count {
    iterations: usize,
    checkpoints: Vec<usize>,
}

impl TrainObserver for Count {
    fn on_iteration(&mut self, _: &TrainState) -> rail_core::Result<()> {
        self.iterations += 1;
        Ok(())
    }
    fn on_checkpoint(&mut self, s: &TrainState) -> rail_core::Result<()> {
        self.checkpoints.push(s.iteration);
        Ok(())
    }
}

#[test]
fn observer_sees_checkpoints() {
    let task = LaneOffsetTask {
        scenes: 4,
        horizon: 10,
        ..Default::default()
    };
    let trainer = TrainerConfig {
        checkpoint_interval: 2,
        ..synthetic_config(5)
    };
    let trpo = TrpoConfig::default();
    let pen = PenaltyConfig::disabled();
    let settings = TrainSettings {
        trainer: &trainer,
        trpo: &trpo,
        penalty: &pen,
    };
    let mut obs = Count {
        iterations: 0,
        checkpoints: vec![],
    };
    train(&task, settings, &task.demos().unwrap(), 1, &mut obs).unwrap();
    assert_eq!(obs.iterations, 5);
    assert_eq!(obs.checkpoints, vec![2, 4]);
}

#[test]
fn synthetic_task_is_learned() {
    let task = LaneOffsetTask::default();
    let state = run_synthetic(200, 2);
    let init = TrainState::initial(1, 1, &synthetic_config(200), 2).unwrap();
    let before = task.offset_error(&init.policy, 200, 99).unwrap();
    let after = task.offset_error(&state.policy, 200, 99).unwrap();
    assert!(after < 0.25 * before, "error {after} vs untrained {before}");

    let delta = TrpoConfig::default().delta_kl;
    for row in &state.telemetry {
        if row.trpo_accepted {
            assert!(row.mean_kl <= 1.1 * delta);
            assert!(row.surrogate_after > row.surrogate_before);
        } else {
            assert_eq!(row.policy_fingerprint_before, row.policy_fingerprint_after);
        }
        assert_eq!(row.critic_updates, 5);
    }
}

fn small_highway() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.sim.n_agents = 4;
    cfg.sim.horizon = 15;
    cfg.trainer.iterations = 2;
    cfg.trainer.policy_hidden = vec![8];
    cfg.trainer.critic_hidden = vec![8];
    cfg.trainer.critic_batch = 50;
    cfg.demo_scenes = 3;
    cfg
}

#[test]
fn highway_training_is_deterministic() {
    let cfg = small_highway();
    let run = || {
        let demos = generate_demos(&cfg.sim, &cfg.expert, cfg.demo_scenes, cfg.seeds.demos).unwrap();
        let buf = DemoBuffer::from_demos(&demos, &cfg.sim, &cfg.penalty).unwrap();
        let scenes = demos.iter().map(|d| d.initial_scene(&cfg.sim).unwrap()).collect();
        train(&cfg.highway_env(scenes), cfg.settings(), &buf, 5, &mut ()).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    assert_eq!(a.telemetry.len(), 2);
    assert!(a.telemetry.iter().all(|t| t.transitions == 2 * 4 * 15));
}

#[test]
fn expert_against_itself_scores_zero() {
    let cfg = small_highway();
    let ev = evaluate(EvalDriver::Expert, &cfg.sim, &cfg.expert, &cfg.penalty, 4, 3).unwrap();
    let r = &ev.report;
    assert!(r.valid);
    assert!(r.rmse_position.iter().chain(&r.rmse_lane_offset).chain(&r.rmse_speed).all(|v| *v == 0.0));
    assert_eq!((r.collision_rate, r.offroad_rate, r.hard_brake_rate), (0.0, 0.0, 0.0));
    let none = evaluate(EvalDriver::Expert, &cfg.sim, &cfg.expert, &cfg.penalty, 0, 3).unwrap();
    assert!(!none.report.valid);
}

#[test]
fn policy_report_matches_recomputation() {
    let cfg = small_highway();
    let state = TrainState::initial(
        rail_core::sim::OBSERVATION_DIM,
        rail_core::trainer::ACTION_DIM,
        &cfg.trainer,
        8,
    )
    .unwrap();
    let driver = EvalDriver::Policy {
        params: &state.policy,
        deterministic: false,
    };
    let ev = evaluate(driver, &cfg.sim, &cfg.expert, &cfg.penalty, 5, 12).unwrap();
    let again = evaluate(driver, &cfg.sim, &cfg.expert, &cfg.penalty, 5, 12).unwrap();
    assert_eq!(ev, again);
    let set = PairedSet {
        sim: cfg.sim,
        expert: ev.expert.clone(),
        policy: ev.replaced.clone(),
    };
    let road = cfg.sim.road();
    let rmse = rmse_oracle(&set, &road);
    for (a, b) in ev.report.rmse_position.iter().zip(&rmse[0]) {
        assert!((a - b).abs() <= 1e-12);
    }
    let rates = event_oracle(&set.policy_flat());
    assert!((ev.report.collision_rate - rates[0]).abs() <= 1e-12);
    assert!((ev.report.offroad_rate - rates[1]).abs() <= 1e-12);
    let pairs = set.pairs();
    let direct = build_report(&pairs, 5, &road, &cfg.penalty).unwrap();
    assert_eq!(direct, ev.report);
    assert_eq!(ev.report.rollouts, 5);
    assert_eq!(ev.report.vehicles, 5 * 4);
}
