//! Worker parallelism for evaluation rollouts and independent runs.
//!
//! Results are collected in index order, so the output never depends on the
//! worker count.

use rail_core::config::ExperimentConfig;
use rail_core::penalty::PenaltyConfig;
use rail_core::sim::{ExpertParams, SimConfig};
use rail_core::trainer::{derive_seed, paired_rollout, EvalDriver, PairedEvaluation};
use rayon::prelude::*;

use crate::{RailError, Result};

pub const THREADS_ENV: &str = "RAIL_THREADS";

/// Worker count: `RAIL_THREADS` if set, otherwise the available cores.
pub fn worker_count() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(RailError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub fn pool() -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count()?)
        .build()
        .map_err(|e| RailError::Other(e.to_string()))
}

/// Same result as `rail_core::trainer::evaluate`, with rollouts spread over
/// the pool.
pub fn evaluate(
    pool: &rayon::ThreadPool,
    driver: EvalDriver<'_>,
    sim: &SimConfig,
    expert: &ExpertParams,
    penalty: &PenaltyConfig,
    n_rollouts: usize,
    seed: u64,
) -> Result<PairedEvaluation> {
    let runs = pool.install(|| {
        (0..n_rollouts)
            .into_par_iter()
            .map(|i| paired_rollout(driver, sim, expert, derive_seed(seed, i as u64)))
            .collect::<rail_core::Result<Vec<_>>>()
    })?;
    Ok(PairedEvaluation::from_rollouts(runs, sim, penalty)?)
}

/// Evaluate with the configured seed and rollout count.
pub fn evaluate_config(pool: &rayon::ThreadPool, driver: EvalDriver<'_>, cfg: &ExperimentConfig) -> Result<PairedEvaluation> {
    evaluate(pool, driver, &cfg.sim, &cfg.expert, &cfg.penalty, cfg.eval_rollouts, cfg.seeds.evaluate)
}

/// Run `jobs` on the pool and return results in input order.
pub fn map_ordered<T, R, F>(pool: &rayon::ThreadPool, jobs: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    pool.install(|| jobs.into_par_iter().map(f).collect())
}
