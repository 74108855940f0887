//! Exact computations on small finite Markov games: discounted occupancy
//! measures, the optimal critic, and projected descent of the occupancy
//! measure toward the demonstrations under support and sharing constraints.
//!
//! # Sharing constraint for two agents
//!
//! Joint states and actions are indexed `s = s1 * n + s2`, `a = a1 * m + a2`.
//! Let `P` be the agent swap `(s1, s2, a1, a2) -> (s2, s1, a2, a1)`. A joint
//! measure with `P rho = rho` has equal per-agent marginals, so the shared
//! constraint is enforced through the swap-symmetric subspace `S`.
//!
//! Projection onto `C ∩ S`, where `C = {rho >= 0, sum = 1/(1-gamma), rho|U = 0}`,
//! takes one symmetrization followed by one projection onto `C`, provided `U`
//! is swap-invariant. Write `x̄ = (x + P x) / 2`. For every `y ∈ S` the
//! residual `x - x̄` is orthogonal to `x̄ - y`, hence
//! `|x - y|² = |x - x̄|² + |x̄ - y|²` and the nearest point of `C ∩ S` to `x`
//! is the nearest point of `C ∩ S` to `x̄`. Because `C` is invariant under `P`,
//! `proj_C(x̄) = proj_C(P x̄) = P proj_C(x̄)`, so `proj_C(x̄)` already lies in
//! `S` and is the answer.

mod game;
mod minimax;
mod verify;

pub use game::{OccupancyTable, TabularGame, TabularPolicy};
pub use minimax::{
    averaging_effect_check, constrained_minimax_iterate, conservative_step, inner_objective,
    linear_inner_objective, objective, optimal_critic, project, project_simplex, AveragingReport,
    Constraints, MinimaxConfig,
};
pub use verify::{
    bisection_projection, feasible_minimizer, marginal_equality_projection, occupancy_of_policy, policy_of_occupancy,
    verify_theory, PropertyCheck, SharingForm, TheoryReport, TheorySpec, BURN_IN,
};
