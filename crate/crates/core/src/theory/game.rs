use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::numerics::DenseMatrix;
use crate::{Error, Result, Rng};

pub const MAX_STATES: usize = 256;
pub const MAX_ACTIONS: usize = 16;

/// Finite discounted Markov game. For two agents, states and actions are
/// joint tuples flattened as `s1 * n + s2` and `a1 * m + a2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabularGame {
    pub n_states: usize,
    pub n_actions: usize,
    /// `P[s, a, s']`, row-major.
    pub transitions: Vec<f64>,
    pub initial: Vec<f64>,
    pub gamma: f64,
    #[serde(default = "one")]
    pub agents: usize,
    /// Undesired `(s, a)` pairs, indexed `s * n_actions + a`.
    #[serde(default)]
    pub undesired: Vec<bool>,
}

fn one() -> usize {
    1
}

impl TabularGame {
    pub fn validate(&self) -> Result<()> {
        let (ns, na) = (self.n_states, self.n_actions);
        let per_agent_ok = match self.agents {
            1 => ns <= MAX_STATES && na <= MAX_ACTIONS,
            2 => true,
            _ => false,
        };
        if ns == 0 || na == 0 || !per_agent_ok {
            return Err(Error::Config(alloc::format!(
                "unsupported game size: {ns} states, {na} actions, {} agents",
                self.agents
            )));
        }
        if self.agents == 2 && (isqrt(ns).is_none() || isqrt(na).is_none()) {
            return Err(Error::Config("two-agent game needs square joint state and action counts".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config("gamma must lie in (0, 1)".into()));
        }
        Error::check_dim("transition tensor", ns * na * ns, self.transitions.len())?;
        Error::check_dim("initial distribution", ns, self.initial.len())?;
        Error::check_dim("undesired mask", ns * na, self.undesired_mask().len())?;
        for (i, row) in self.transitions.chunks(ns).enumerate() {
            if !distribution(row) {
                return Err(Error::Config(alloc::format!(
                    "transition row (s={}, a={}) is not a distribution",
                    i / na,
                    i % na
                )));
            }
        }
        if !distribution(&self.initial) {
            return Err(Error::Config("initial distribution must sum to 1".into()));
        }
        Ok(())
    }

    /// The undesired mask, all-false when none was given.
    pub fn undesired_mask(&self) -> Vec<bool> {
        if self.undesired.is_empty() {
            vec![false; self.n_states * self.n_actions]
        } else {
            self.undesired.clone()
        }
    }

    pub fn p(&self, s: usize, a: usize, s2: usize) -> f64 {
        self.transitions[(s * self.n_actions + a) * self.n_states + s2]
    }

    /// Random dense game with transition rows and `p0` drawn by normalizing
    /// uniform weights.
    pub fn random(n_states: usize, n_actions: usize, gamma: f64, rng: &mut Rng) -> Self {
        let mut transitions = Vec::with_capacity(n_states * n_actions * n_states);
        for _ in 0..n_states * n_actions {
            transitions.extend(random_distribution(n_states, rng));
        }
        Self {
            n_states,
            n_actions,
            transitions,
            initial: random_distribution(n_states, rng),
            gamma,
            agents: 1,
            undesired: Vec::new(),
        }
    }

    /// Two copies of a single-agent game evolving independently. A joint
    /// pair is undesired when either agent's pair is.
    pub fn independent_pair(single: &TabularGame) -> Result<Self> {
        single.validate()?;
        if single.agents != 1 {
            return Err(Error::Config("independent_pair needs a single-agent game".into()));
        }
        let (n, m) = (single.n_states, single.n_actions);
        let (ns, na) = (n * n, m * m);
        let mut transitions = vec![0.0; ns * na * ns];
        let u1 = single.undesired_mask();
        let mut undesired = vec![false; ns * na];
        for s1 in 0..n {
            for s2 in 0..n {
                for a1 in 0..m {
                    for a2 in 0..m {
                        let (s, a) = (s1 * n + s2, a1 * m + a2);
                        undesired[s * na + a] = u1[s1 * m + a1] || u1[s2 * m + a2];
                        for t1 in 0..n {
                            for t2 in 0..n {
                                transitions[(s * na + a) * ns + t1 * n + t2] =
                                    single.p(s1, a1, t1) * single.p(s2, a2, t2);
                            }
                        }
                    }
                }
            }
        }
        let mut initial = vec![0.0; ns];
        for s1 in 0..n {
            for s2 in 0..n {
                initial[s1 * n + s2] = single.initial[s1] * single.initial[s2];
            }
        }
        Ok(Self {
            n_states: ns,
            n_actions: na,
            transitions,
            initial,
            gamma: single.gamma,
            agents: 2,
            undesired,
        })
    }

    /// Per-agent `(states, actions)` for a two-agent game.
    pub fn agent_dims(&self) -> (usize, usize) {
        match self.agents {
            2 => (isqrt(self.n_states).unwrap_or(0), isqrt(self.n_actions).unwrap_or(0)),
            _ => (self.n_states, self.n_actions),
        }
    }

    /// Total occupancy mass `1 / (1 - gamma)`.
    pub fn mass(&self) -> f64 {
        1.0 / (1.0 - self.gamma)
    }
}

fn isqrt(n: usize) -> Option<usize> {
    let r = (0..=n).find(|r| r * r >= n)?;
    (r * r == n).then_some(r)
}

fn distribution(row: &[f64]) -> bool {
    row.iter().all(|p| *p >= 0.0 && p.is_finite()) && (row.iter().sum::<f64>() - 1.0).abs() <= 1e-12
}

fn random_distribution(n: usize, rng: &mut Rng) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = w.iter().sum();
    let mut d: Vec<f64> = w.iter().map(|x| x / s).collect();
    // Put the rounding residue on the largest entry so rows sum to 1 tightly.
    let r = 1.0 - d.iter().sum::<f64>();
    let k = (0..n).max_by(|&i, &j| d[i].total_cmp(&d[j])).unwrap_or(0);
    d[k] += r;
    d
}

/// Index of the agent-swapped joint pair.
pub(crate) fn swap_index(i: usize, n: usize, m: usize) -> usize {
    let na = m * m;
    let (s, a) = (i / na, i % na);
    let (s1, s2, a1, a2) = (s / n, s % n, a / m, a % m);
    (s2 * n + s1) * na + a2 * m + a1
}

/// `pi(a | s)`, row-major by state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    pub n_states: usize,
    pub n_actions: usize,
    pub probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    pub fn random(n_states: usize, n_actions: usize, rng: &mut Rng) -> Self {
        let mut probs = Vec::with_capacity(n_states * n_actions);
        for _ in 0..n_states {
            probs.extend(random_distribution(n_actions, rng));
        }
        Self {
            n_states,
            n_actions,
            probs,
        }
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn validate(&self) -> Result<()> {
        Error::check_dim("policy table", self.n_states * self.n_actions, self.probs.len())?;
        if self.probs.chunks(self.n_actions).all(distribution) {
            Ok(())
        } else {
            Err(Error::Config("policy rows must be distributions".into()))
        }
    }

    /// Joint policy of two agents acting independently.
    pub fn product(a: &TabularPolicy, b: &TabularPolicy) -> Self {
        let (n, m) = (a.n_states, a.n_actions);
        let mut probs = vec![0.0; n * n * m * m];
        for s1 in 0..n {
            for s2 in 0..n {
                for a1 in 0..m {
                    for a2 in 0..m {
                        probs[(s1 * n + s2) * m * m + a1 * m + a2] = a.prob(s1, a1) * b.prob(s2, a2);
                    }
                }
            }
        }
        Self {
            n_states: n * n,
            n_actions: m * m,
            probs,
        }
    }
}

/// Discounted state-action occupancy `rho[s, a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyTable {
    pub n_states: usize,
    pub n_actions: usize,
    pub rho: Vec<f64>,
}

impl OccupancyTable {
    pub fn total(&self) -> f64 {
        self.rho.iter().sum()
    }

    pub fn state_mass(&self, s: usize) -> f64 {
        self.rho[s * self.n_actions..(s + 1) * self.n_actions].iter().sum()
    }

    /// Policy recovered by normalizing each state row; unvisited states get
    /// the uniform policy.
    pub fn policy(&self) -> TabularPolicy {
        let mut probs = vec![0.0; self.rho.len()];
        for s in 0..self.n_states {
            let row = &self.rho[s * self.n_actions..(s + 1) * self.n_actions];
            let z: f64 = row.iter().sum();
            for a in 0..self.n_actions {
                probs[s * self.n_actions + a] = if z > 0.0 { row[a] / z } else { 1.0 / self.n_actions as f64 };
            }
        }
        TabularPolicy {
            n_states: self.n_states,
            n_actions: self.n_actions,
            probs,
        }
    }

    /// Marginal `(s_i, a_i)` occupancy of agent `agent` in a two-agent table.
    pub fn marginal(&self, agent: usize, n: usize, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; n * m];
        for (i, r) in self.rho.iter().enumerate() {
            let (s, a) = (i / self.n_actions, i % self.n_actions);
            let (si, ai) = if agent == 0 { (s / n, a / m) } else { (s % n, a % m) };
            out[si * m + ai] += r;
        }
        out
    }
}

impl TabularGame {
    /// Exact occupancy of `policy`: solves `(I - gamma P_pi^T) d = p0` for the
    /// state occupancy `d`, then `rho(s, a) = pi(a | s) d(s)`.
    pub fn occupancy_of_policy(&self, policy: &TabularPolicy) -> Result<OccupancyTable> {
        self.validate()?;
        policy.validate()?;
        Error::check_dim("policy states", self.n_states, policy.n_states)?;
        Error::check_dim("policy actions", self.n_actions, policy.n_actions)?;
        let n = self.n_states;
        let mut m = DenseMatrix::identity(n);
        for s in 0..n {
            for a in 0..self.n_actions {
                let pa = policy.prob(s, a);
                if pa == 0.0 {
                    continue;
                }
                for s2 in 0..n {
                    m[(s2, s)] -= self.gamma * pa * self.p(s, a, s2);
                }
            }
        }
        let d = m.solve(&self.initial)?;
        let mut rho = vec![0.0; n * self.n_actions];
        for s in 0..n {
            for a in 0..self.n_actions {
                rho[s * self.n_actions + a] = (policy.prob(s, a) * d[s]).max(0.0);
            }
        }
        Ok(OccupancyTable {
            n_states: n,
            n_actions: self.n_actions,
            rho,
        })
    }
}
