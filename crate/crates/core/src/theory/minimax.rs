use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::game::{swap_index, OccupancyTable, TabularGame, TabularPolicy};
use crate::{Error, Result};

/// Feasible set for the occupancy iterate: support restricted to `support`
/// (the complement of the undesired set) and, for two-agent games, equal
/// per-agent marginals through swap symmetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    pub sharing: bool,
    pub support: Vec<bool>,
}

impl Constraints {
    pub fn from_game(game: &TabularGame, sharing: bool) -> Self {
        Self {
            sharing,
            support: game.undesired_mask().iter().map(|u| !u).collect(),
        }
    }

    pub fn unconstrained(game: &TabularGame) -> Self {
        Self {
            sharing: false,
            support: vec![true; game.n_states * game.n_actions],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MinimaxConfig {
    pub iters: usize,
    /// Fixed step of the projected descent on the occupancy measure.
    pub step: f64,
}

impl Default for MinimaxConfig {
    fn default() -> Self {
        Self { iters: 5000, step: 0.5 }
    }
}

/// `0.5 (1 - gamma) / (|S| |A|)`, a much smaller step that also converges.
pub fn conservative_step(game: &TabularGame) -> f64 {
    0.5 * (1.0 - game.gamma) / (game.n_states * game.n_actions) as f64
}

/// `D*[s, a] = rho_expert[s, a] - rho[s, a]`.
pub fn optimal_critic(rho_expert: &[f64], rho: &[f64]) -> Result<Vec<f64>> {
    Error::check_dim("occupancy tables", rho_expert.len(), rho.len())?;
    Ok(rho_expert.iter().zip(rho).map(|(e, r)| e - r).collect())
}

/// `sum D (rho_E - rho)`.
pub fn linear_inner_objective(critic: &[f64], rho_expert: &[f64], rho: &[f64]) -> f64 {
    critic.iter().zip(rho_expert.iter().zip(rho)).map(|(d, (e, r))| d * (e - r)).sum()
}

/// `sum D (rho_E - rho) - |D|^2 / 2`; maximized by [`optimal_critic`].
pub fn inner_objective(critic: &[f64], rho_expert: &[f64], rho: &[f64]) -> f64 {
    linear_inner_objective(critic, rho_expert, rho) - 0.5 * critic.iter().map(|d| d * d).sum::<f64>()
}

/// `|rho - rho_E|^2 / 2`, the value of the inner problem at its optimum.
pub fn objective(rho: &[f64], rho_expert: &[f64]) -> f64 {
    0.5 * rho.iter().zip(rho_expert).map(|(r, e)| (r - e) * (r - e)).sum::<f64>()
}

/// Euclidean projection onto `{x >= 0, sum x = mass, x = 0 off mask}`.
pub fn project_simplex(x: &[f64], mask: &[bool], mass: f64) -> Result<Vec<f64>> {
    Error::check_dim("support mask", x.len(), mask.len())?;
    let mut u: Vec<f64> = x.iter().zip(mask).filter(|(_, m)| **m).map(|(v, _)| *v).collect();
    if u.is_empty() {
        return Err(Error::Infeasible("support set is empty".into()));
    }
    u.sort_by(|a, b| b.total_cmp(a));
    let (mut cum, mut tau) = (0.0, 0.0);
    for (j, v) in u.iter().enumerate() {
        cum += v;
        let t = (cum - mass) / (j + 1) as f64;
        if v - t > 0.0 {
            tau = t;
        }
    }
    Ok(x.iter()
        .zip(mask)
        .map(|(v, m)| if *m { (v - tau).max(0.0) } else { 0.0 })
        .collect())
}

/// Projection onto the feasible set of `constraints`.
pub fn project(x: &[f64], game: &TabularGame, constraints: &Constraints) -> Result<Vec<f64>> {
    let len = game.n_states * game.n_actions;
    Error::check_dim("occupancy", len, x.len())?;
    Error::check_dim("support mask", len, constraints.support.len())?;
    if !constraints.sharing {
        return project_simplex(x, &constraints.support, game.mass());
    }
    if game.agents != 2 {
        return Err(Error::Config("the sharing constraint needs a two-agent game".into()));
    }
    let (n, m) = game.agent_dims();
    if (0..len).any(|i| constraints.support[i] != constraints.support[swap_index(i, n, m)]) {
        return Err(Error::Config("support must be symmetric under agent swap".into()));
    }
    let sym: Vec<f64> = (0..len).map(|i| 0.5 * (x[i] + x[swap_index(i, n, m)])).collect();
    let mut p = project_simplex(&sym, &constraints.support, game.mass())?;
    // Remove rounding asymmetry so marginals agree to the last bit.
    for i in 0..len {
        let j = swap_index(i, n, m);
        if i < j {
            let v = 0.5 * (p[i] + p[j]);
            p[i] = v;
            p[j] = v;
        }
    }
    Ok(p)
}

/// Alternate the optimal critic with a projected descent step on `rho`,
/// starting from the uniform measure over the support. The returned trace
/// holds the initial iterate followed by one table per iteration.
pub fn constrained_minimax_iterate(
    game: &TabularGame,
    rho_expert: &OccupancyTable,
    constraints: &Constraints,
    config: &MinimaxConfig,
) -> Result<Vec<OccupancyTable>> {
    game.validate()?;
    let len = game.n_states * game.n_actions;
    Error::check_dim("expert occupancy", len, rho_expert.rho.len())?;
    Error::check_dim("support mask", len, constraints.support.len())?;
    if !(config.step > 0.0 && config.step.is_finite()) {
        return Err(Error::Config("step must be positive".into()));
    }
    let count = constraints.support.iter().filter(|s| **s).count();
    if count == 0 {
        return Err(Error::Infeasible("support set is empty".into()));
    }
    let w = game.mass() / count as f64;
    let mut rho: Vec<f64> = constraints.support.iter().map(|s| if *s { w } else { 0.0 }).collect();
    let table = |rho: Vec<f64>| OccupancyTable {
        n_states: game.n_states,
        n_actions: game.n_actions,
        rho,
    };
    let mut trace = Vec::with_capacity(config.iters + 1);
    trace.push(table(rho.clone()));
    for _ in 0..config.iters {
        let d = optimal_critic(&rho_expert.rho, &rho)?;
        let stepped: Vec<f64> = rho.iter().zip(&d).map(|(r, d)| r + config.step * d).collect();
        rho = project(&stepped, game, constraints)?;
        trace.push(table(rho.clone()));
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragingReport {
    /// Agent-0 marginal of the final shared iterate.
    pub learned_marginal: Vec<f64>,
    /// Agent-1 marginal of the final shared iterate.
    pub other_marginal: Vec<f64>,
    pub expert_marginals: [Vec<f64>; 2],
    pub mean_expert_marginal: Vec<f64>,
    /// Euclidean distance between the learned and the mean expert marginal.
    pub distance_to_mean: f64,
    /// Largest absolute gap between the two learned marginals.
    pub marginal_gap: f64,
    pub final_objective: f64,
    pub final_iterate: OccupancyTable,
}

/// Train a shared occupancy on two independent copies of `single`, with
/// agent `i` demonstrated by `experts[i]`, and compare the learned marginal
/// with the average of the expert marginals.
pub fn averaging_effect_check(
    single: &TabularGame,
    experts: [&TabularPolicy; 2],
    config: &MinimaxConfig,
) -> Result<AveragingReport> {
    let pair = TabularGame::independent_pair(single)?;
    let (n, m) = (single.n_states, single.n_actions);
    let rho_e = pair.occupancy_of_policy(&TabularPolicy::product(experts[0], experts[1]))?;
    let constraints = Constraints::from_game(&pair, true);
    let trace = constrained_minimax_iterate(&pair, &rho_e, &constraints, config)?;
    let last = trace.into_iter().last().ok_or(Error::EmptyBatch("iterate trace"))?;
    let learned = last.marginal(0, n, m);
    let other = last.marginal(1, n, m);
    let e0 = rho_e.marginal(0, n, m);
    let e1 = rho_e.marginal(1, n, m);
    let mean: Vec<f64> = e0.iter().zip(&e1).map(|(a, b)| 0.5 * (a + b)).collect();
    let distance = crate::math::sqrt(learned.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum());
    let gap = learned.iter().zip(&other).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(AveragingReport {
        final_objective: objective(&last.rho, &rho_e.rho),
        learned_marginal: learned,
        other_marginal: other,
        expert_marginals: [e0, e1],
        mean_expert_marginal: mean,
        distance_to_mean: distance,
        marginal_gap: gap,
        final_iterate: last,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_projection_basics() {
        let p = project_simplex(&[0.2, 0.3, 0.5], &[true; 3], 1.0).unwrap();
        assert_eq!(p, vec![0.2, 0.3, 0.5]);
        let p = project_simplex(&[3.0, 0.0, -1.0], &[true; 3], 1.0).unwrap();
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
        let p = project_simplex(&[1.0, 1.0], &[true, false], 2.0).unwrap();
        assert_eq!(p, vec![2.0, 0.0]);
        assert!(project_simplex(&[1.0], &[false], 1.0).is_err());
    }

    #[test]
    fn critic_zero_when_matched() {
        let r = [0.3, 0.7];
        assert_eq!(optimal_critic(&r, &r).unwrap(), vec![0.0, 0.0]);
    }
}
