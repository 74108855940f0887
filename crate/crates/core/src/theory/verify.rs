use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::game::{OccupancyTable, TabularGame, TabularPolicy};
use super::minimax::{
    constrained_minimax_iterate, inner_objective, linear_inner_objective, objective, optimal_critic, Constraints,
    MinimaxConfig,
};
use crate::math::sqrt;
use crate::{Error, Result};

/// Projection onto `{x >= 0, sum x = mass, x = 0 off mask}` by bisection on
/// the threshold. Slower than the sort-based projection; kept as a check.
pub fn bisection_projection(x: &[f64], mask: &[bool], mass: f64) -> Result<Vec<f64>> {
    Error::check_dim("support mask", x.len(), mask.len())?;
    let kept: Vec<f64> = x.iter().zip(mask).filter(|(_, m)| **m).map(|(v, _)| *v).collect();
    if kept.is_empty() {
        return Err(Error::Infeasible("support set is empty".into()));
    }
    let excess = |tau: f64| kept.iter().map(|v| (v - tau).max(0.0)).sum::<f64>() - mass;
    let hi_v = kept.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (hi_v - mass - 1.0, hi_v);
    while excess(lo) < 0.0 {
        lo -= 2.0 * (hi - lo);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    Ok(x.iter()
        .zip(mask)
        .map(|(v, m)| if *m { (v - tau).max(0.0) } else { 0.0 })
        .collect())
}

/// Projection onto the subspace where both agents' `(s_i, a_i)` marginals
/// agree. Assumes the two marginals carry the same total mass.
pub fn marginal_equality_projection(x: &[f64], n: usize, m: usize) -> Vec<f64> {
    let na = m * m;
    let mut d = vec![0.0; n * m];
    for (i, v) in x.iter().enumerate() {
        let (s, a) = (i / na, i % na);
        d[(s / n) * m + a / m] += v;
        d[(s % n) * m + a % m] -= v;
    }
    let k = (2 * n * m) as f64;
    x.iter()
        .enumerate()
        .map(|(i, v)| {
            let (s, a) = (i / na, i % na);
            v - (d[(s / n) * m + a / m] - d[(s % n) * m + a % m]) / k
        })
        .collect()
}

/// Linear form of the sharing constraint used by [`feasible_minimizer`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharingForm {
    /// Joint measure invariant under the agent swap.
    SwapSymmetry,
    /// Equal per-agent marginals only.
    MarginalEquality,
}

fn swap_average(x: &[f64], n: usize, m: usize) -> Vec<f64> {
    (0..x.len()).map(|i| 0.5 * (x[i] + x[super::game::swap_index(i, n, m)])).collect()
}

/// Minimizer of `|rho - rho_E|^2 / 2` over the feasible set, computed
/// without the descent loop: a bisection projection when there is no
/// sharing, Dykstra's alternating projections onto the sharing subspace
/// otherwise.
pub fn feasible_minimizer(
    game: &TabularGame,
    rho_expert: &[f64],
    constraints: &Constraints,
    form: SharingForm,
    tol: f64,
    max_iters: usize,
) -> Result<Vec<f64>> {
    let mass = game.mass();
    if !constraints.sharing {
        return bisection_projection(rho_expert, &constraints.support, mass);
    }
    let (n, m) = game.agent_dims();
    let subspace = |x: &[f64]| match form {
        SharingForm::SwapSymmetry => swap_average(x, n, m),
        SharingForm::MarginalEquality => marginal_equality_projection(x, n, m),
    };
    let mut x = rho_expert.to_vec();
    let mut p = vec![0.0; x.len()];
    let mut q = vec![0.0; x.len()];
    for _ in 0..max_iters {
        let shifted: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + b).collect();
        let y = bisection_projection(&shifted, &constraints.support, mass)?;
        p = shifted.iter().zip(&y).map(|(a, b)| a - b).collect();
        let shifted: Vec<f64> = y.iter().zip(&q).map(|(a, b)| a + b).collect();
        let next = subspace(&shifted);
        q = shifted.iter().zip(&next).map(|(a, b)| a - b).collect();
        let change = sqrt(next.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum());
        let gap = sqrt(next.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum());
        x = next;
        if change < tol && gap < tol {
            break;
        }
    }
    Ok(x)
}

/// Exact occupancy of `policy` in `game`.
pub fn occupancy_of_policy(game: &TabularGame, policy: &TabularPolicy) -> Result<OccupancyTable> {
    game.occupancy_of_policy(policy)
}

/// `pi(a | s) = rho(s, a) / rho(s)`, uniform where `rho(s) = 0`.
pub fn policy_of_occupancy(occupancy: &OccupancyTable) -> TabularPolicy {
    occupancy.policy()
}

/// A theory experiment: one game with one demonstrator, or a single-agent
/// game with two demonstrators that is lifted to an independent pair trained
/// under parameter sharing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheorySpec {
    pub game: TabularGame,
    pub experts: Vec<TabularPolicy>,
    #[serde(default)]
    pub minimax: MinimaxConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl PropertyCheck {
    fn new(name: &str, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            residual,
            tolerance,
            passed: residual <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub checks: Vec<PropertyCheck>,
    /// Objective at every iterate, starting with the initial one.
    pub objective_trace: Vec<f64>,
    pub final_iterate: OccupancyTable,
    pub expert_occupancy: OccupancyTable,
}

impl TheoryReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Iterations skipped before the objective must stop increasing.
pub const BURN_IN: usize = 10;

fn distance(a: &[f64], b: &[f64]) -> f64 {
    sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Run the constrained iteration for `spec` and check it against
/// independent computations.
pub fn verify_theory(spec: &TheorySpec) -> Result<TheoryReport> {
    let (game, expert, sharing) = match spec.experts.as_slice() {
        [one] => (spec.game.clone(), one.clone(), false),
        [a, b] => (
            TabularGame::independent_pair(&spec.game)?,
            TabularPolicy::product(a, b),
            true,
        ),
        _ => return Err(Error::Config("a theory spec needs one or two expert policies".into())),
    };
    let mass = game.mass();
    let rho_e = game.occupancy_of_policy(&expert)?;
    let constraints = Constraints::from_game(&game, sharing);
    let trace = constrained_minimax_iterate(&game, &rho_e, &constraints, &spec.minimax)?;
    let objective_trace: Vec<f64> = trace.iter().map(|t| objective(&t.rho, &rho_e.rho)).collect();
    let last = trace.last().ok_or(Error::EmptyBatch("iterate trace"))?.clone();

    let mut checks = Vec::new();
    checks.push(PropertyCheck::new("expert_mass", (rho_e.total() - mass).abs(), 1e-9));
    let back = game.occupancy_of_policy(&rho_e.policy())?;
    checks.push(PropertyCheck::new("round_trip", distance(&back.rho, &rho_e.rho), 1e-9));

    let mut worst_sum: f64 = 0.0;
    let mut worst_neg: f64 = 0.0;
    let mut worst_u: f64 = 0.0;
    for t in &trace {
        worst_sum = worst_sum.max((t.total() - mass).abs());
        worst_neg = worst_neg.max(t.rho.iter().fold(0.0, |w, r| w.max(-r)));
        let off: f64 = t.rho.iter().zip(&constraints.support).filter(|(_, s)| !**s).map(|(r, _)| r.abs()).sum();
        worst_u = worst_u.max(off);
    }
    checks.push(PropertyCheck::new("iterate_mass", worst_sum, 1e-9));
    checks.push(PropertyCheck::new("iterate_nonnegative", worst_neg, 0.0));
    checks.push(PropertyCheck::new("mass_on_undesired", worst_u, 1e-9));

    let rise = objective_trace
        .windows(2)
        .skip(BURN_IN)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    checks.push(PropertyCheck::new("objective_non_increasing", rise, 1e-12));

    let target = feasible_minimizer(&game, &rho_e.rho, &constraints, SharingForm::SwapSymmetry, 1e-13, 200_000)?;
    checks.push(PropertyCheck::new("distance_to_minimizer", distance(&last.rho, &target), 1e-6));
    let recoverable = rho_e.rho.iter().zip(&constraints.support).all(|(r, s)| *s || *r == 0.0);
    if recoverable && !sharing {
        checks.push(PropertyCheck::new("recovers_expert", distance(&last.rho, &rho_e.rho), 1e-6));
    }

    let d = optimal_critic(&rho_e.rho, &last.rho)?;
    let sign: Vec<f64> = d.iter().map(|v| if *v > 0.0 { 1.0 } else if *v < 0.0 { -1.0 } else { 0.0 }).collect();
    let best = linear_inner_objective(&sign, &rho_e.rho, &last.rho);
    let l1: f64 = d.iter().map(|v| v.abs()).sum();
    checks.push(PropertyCheck::new("sign_critic_attains_l1_gap", (best - l1).abs(), 1e-9));
    let at_opt = inner_objective(&d, &rho_e.rho, &last.rho);
    checks.push(PropertyCheck::new("optimal_critic_value", (at_opt - objective(&last.rho, &rho_e.rho)).abs(), 1e-9));

    if sharing {
        let (n, m) = game.agent_dims();
        let learned = last.marginal(0, n, m);
        let other = last.marginal(1, n, m);
        checks.push(PropertyCheck::new("marginal_equality", distance(&learned, &other), 1e-9));
        let marginal_target =
            feasible_minimizer(&game, &rho_e.rho, &constraints, SharingForm::MarginalEquality, 1e-13, 200_000)?;
        let oracle = OccupancyTable {
            n_states: game.n_states,
            n_actions: game.n_actions,
            rho: marginal_target,
        };
        checks.push(PropertyCheck::new(
            "averaging_matches_minimizer",
            distance(&learned, &oracle.marginal(0, n, m)),
            1e-3,
        ));
    }
    Ok(TheoryReport {
        checks,
        objective_trace,
        final_iterate: last,
        expert_occupancy: rho_e,
    })
}
