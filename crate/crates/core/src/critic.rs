//! Wasserstein-style critic over single-agent `(observation, action)` pairs.
//!
//! The critic is trained by gradient ascent on
//! `mean D(expert) - mean D(policy)`, and every weight and bias is clipped to
//! `[-clip_bound, clip_bound]` after each step to keep it Lipschitz.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::numerics::{FlatParams, MlpSpec, MlpWorkspace};
use crate::{Error, Result, Rng};

/// Row-major batch of concatenated `[observation, action]` inputs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SaBatch {
    width: usize,
    data: Vec<f64>,
}

impl SaBatch {
    pub fn new(obs_dim: usize, action_dim: usize) -> Self {
        Self {
            width: obs_dim + action_dim,
            data: Vec::new(),
        }
    }

    pub fn push(&mut self, obs: &[f64], action: &[f64]) {
        debug_assert_eq!(obs.len() + action.len(), self.width);
        self.data.extend_from_slice(obs);
        self.data.extend_from_slice(action);
    }

    pub fn len(&self) -> usize {
        if self.width == 0 {
            0
        } else {
            self.data.len() / self.width
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.width.max(1))
    }

    /// `count` rows drawn uniformly with replacement.
    pub fn sample(&self, count: usize, rng: &mut Rng) -> Self {
        use rand::Rng as _;
        let mut out = Self {
            width: self.width,
            data: Vec::with_capacity(count * self.width),
        };
        let n = self.len();
        for _ in 0..count {
            let i = rng.random_range(0..n);
            out.data.extend_from_slice(self.row(i));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticParams {
    spec: MlpSpec,
    params: FlatParams,
    clip_bound: f64,
}

impl CriticParams {
    pub fn new(spec: MlpSpec, params: FlatParams, clip_bound: f64) -> Result<Self> {
        if spec.output_dim() != 1 {
            return Err(Error::Config("critic must have a scalar output".into()));
        }
        if !(clip_bound > 0.0 && clip_bound.is_finite()) {
            return Err(Error::Config("critic clip bound must be positive".into()));
        }
        Error::check_dim("critic parameters", spec.param_count(), params.len())?;
        let mut c = Self {
            spec,
            params,
            clip_bound,
        };
        c.clip();
        Ok(c)
    }

    /// Orthogonal init (output gain 1), then clipped.
    pub fn init(spec: MlpSpec, rng: &mut Rng, clip_bound: f64) -> Result<Self> {
        let params = spec.init(rng, 1.0);
        Self::new(spec, params, clip_bound)
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &FlatParams {
        &self.params
    }

    pub fn clip_bound(&self) -> f64 {
        self.clip_bound
    }

    fn clip(&mut self) {
        let c = self.clip_bound;
        self.params.0.iter_mut().for_each(|w| *w = crate::math::clamp(*w, -c, c));
    }

    /// Score of one concatenated `[observation, action]` input.
    pub fn score_input(&self, input: &[f64]) -> Result<f64> {
        let mut ws = MlpWorkspace::new(&self.spec);
        Ok(ws.forward(&self.spec, self.params.as_slice(), input)?[0])
    }

    /// `D_psi(observation, action)`.
    pub fn score(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        let mut input = Vec::with_capacity(obs.len() + action.len());
        input.extend_from_slice(obs);
        input.extend_from_slice(action);
        self.score_input(&input)
    }

    pub fn score_gradient(&self, obs: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        let mut input = obs.to_vec();
        input.extend_from_slice(action);
        let mut ws = MlpWorkspace::new(&self.spec);
        ws.forward(&self.spec, self.params.as_slice(), &input)?;
        let mut g = vec![0.0; self.spec.param_count()];
        ws.backward_accumulate(&self.spec, self.params.as_slice(), &[1.0], 1.0, &mut g)?;
        Ok(g)
    }

    pub fn mean_score(&self, batch: &SaBatch) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch("critic batch"));
        }
        let mut ws = MlpWorkspace::new(&self.spec);
        let mut sum = 0.0;
        for row in batch.rows() {
            sum += ws.forward(&self.spec, self.params.as_slice(), row)?[0];
        }
        Ok(sum / batch.len() as f64)
    }

    /// `mean D(expert) - mean D(policy)`.
    pub fn objective(&self, expert: &SaBatch, policy: &SaBatch) -> Result<f64> {
        Ok(self.mean_score(expert)? - self.mean_score(policy)?)
    }

    /// Gradient of [`objective`](Self::objective) with respect to the parameters.
    pub fn objective_gradient(&self, expert: &SaBatch, policy: &SaBatch) -> Result<Vec<f64>> {
        if expert.is_empty() {
            return Err(Error::EmptyBatch("expert batch"));
        }
        if policy.is_empty() {
            return Err(Error::EmptyBatch("policy batch"));
        }
        let mut ws = MlpWorkspace::new(&self.spec);
        let p = self.params.as_slice();
        let mut halves = [vec![0.0; self.spec.param_count()], vec![0.0; self.spec.param_count()]];
        for (batch, g) in [expert, policy].into_iter().zip(halves.iter_mut()) {
            let w = 1.0 / batch.len() as f64;
            for row in batch.rows() {
                ws.forward(&self.spec, p, row)?;
                ws.backward_accumulate(&self.spec, p, &[1.0], w, g)?;
            }
        }
        let [ge, gp] = halves;
        let g: Vec<f64> = ge.iter().zip(&gp).map(|(a, b)| a - b).collect();
        if !crate::math::all_finite(&g) {
            return Err(Error::Numerical("non-finite critic gradient".into()));
        }
        Ok(g)
    }
}

/// One ascent step on the critic objective followed by weight clipping.
pub fn critic_update(
    critic: &CriticParams,
    expert: &SaBatch,
    policy: &SaBatch,
    learn_rate: f64,
) -> Result<CriticParams> {
    let g = critic.objective_gradient(expert, policy)?;
    let mut next = critic.clone();
    crate::math::axpy(learn_rate, &g, &mut next.params.0);
    next.clip();
    Ok(next)
}

/// Critic score minus the augmentation penalty.
pub fn surrogate_reward(critic: &CriticParams, obs: &[f64], action: &[f64], penalty: f64) -> Result<f64> {
    Ok(critic.score(obs, action)? - penalty)
}
