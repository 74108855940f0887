//! The shared stochastic policy: a diagonal Gaussian whose mean is an MLP of
//! the observation features and whose log standard deviation is a
//! state-independent vector.
//!
//! One [`PolicyParams`] value drives every agent; there is no per-agent
//! parameter storage anywhere.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::math::{clamp, exp, LN_2PI};
use crate::numerics::{FlatParams, MlpSpec, MlpWorkspace};
use crate::{Error, Result, Rng};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    spec: MlpSpec,
    params: FlatParams,
    log_std: Vec<f64>,
}

impl PolicyParams {
    pub fn new(spec: MlpSpec, params: FlatParams, log_std: Vec<f64>) -> Result<Self> {
        Error::check_dim("policy parameters", spec.param_count(), params.len())?;
        Error::check_dim("log_std", spec.output_dim(), log_std.len())?;
        if !crate::math::all_finite(params.as_slice()) {
            return Err(Error::Numerical("non-finite policy parameters".into()));
        }
        if log_std
            .iter()
            .any(|s| !s.is_finite() || *s < LOG_STD_MIN || *s > LOG_STD_MAX)
        {
            return Err(Error::Config(alloc::format!(
                "log_std must lie in [{LOG_STD_MIN}, {LOG_STD_MAX}]"
            )));
        }
        Ok(Self {
            spec,
            params,
            log_std,
        })
    }

    /// Orthogonal init with output gain 0.01 and a constant log std.
    pub fn init(spec: MlpSpec, rng: &mut Rng, log_std: f64) -> Result<Self> {
        let params = spec.init(rng, 0.01);
        let n = spec.output_dim();
        Self::new(spec, params, vec![log_std; n])
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &FlatParams {
        &self.params
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }

    pub fn obs_dim(&self) -> usize {
        self.spec.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.spec.output_dim()
    }

    /// Length of [`flat`](Self::flat): network parameters then log std.
    pub fn flat_dim(&self) -> usize {
        self.params.len() + self.log_std.len()
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.params.0.clone();
        v.extend_from_slice(&self.log_std);
        v
    }

    /// Rebuild from a flat vector, clamping the log std into its bounds.
    pub fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        Error::check_dim("flat policy vector", self.flat_dim(), flat.len())?;
        if !crate::math::all_finite(flat) {
            return Err(Error::Numerical("non-finite policy update".into()));
        }
        let n = self.params.len();
        Ok(Self {
            spec: self.spec.clone(),
            params: FlatParams(flat[..n].to_vec()),
            log_std: flat[n..]
                .iter()
                .map(|s| clamp(*s, LOG_STD_MIN, LOG_STD_MAX))
                .collect(),
        })
    }

    pub fn mean(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let mut ws = MlpWorkspace::new(&self.spec);
        Ok(ws.forward(&self.spec, self.params.as_slice(), obs)?.to_vec())
    }

    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        Error::check_dim("action", self.action_dim(), action.len())?;
        let mean = self.mean(obs)?;
        Ok(gaussian_log_prob(&mean, &self.log_std, action))
    }

    /// Gradient of `log pi(action | obs)` with respect to [`flat`](Self::flat).
    pub fn log_prob_gradient(&self, obs: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim("action", self.action_dim(), action.len())?;
        let mut ws = MlpWorkspace::new(&self.spec);
        let mut grad = vec![0.0; self.flat_dim()];
        self.accumulate_log_prob_gradient(&mut ws, obs, action, 1.0, &mut grad)?;
        Ok(grad)
    }

    /// `grad += scale * d log pi(action | obs) / d flat`.
    pub(crate) fn accumulate_log_prob_gradient(
        &self,
        ws: &mut MlpWorkspace,
        obs: &[f64],
        action: &[f64],
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        let n = self.params.len();
        let mean = ws.forward(&self.spec, self.params.as_slice(), obs)?.to_vec();
        let mut out_grad = vec![0.0; mean.len()];
        for d in 0..mean.len() {
            let var = exp(2.0 * self.log_std[d]);
            let diff = action[d] - mean[d];
            out_grad[d] = diff / var;
            grad[n + d] += scale * (diff * diff / var - 1.0);
        }
        ws.backward_accumulate(&self.spec, self.params.as_slice(), &out_grad, scale, &mut grad[..n])
    }

    /// Draw an action and its log probability.
    pub fn sample(&self, obs: &[f64], rng: &mut Rng) -> Result<(Vec<f64>, f64)> {
        let mean = self.mean(obs)?;
        let action: Vec<f64> = mean
            .iter()
            .zip(&self.log_std)
            .map(|(m, s)| m + exp(*s) * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let lp = gaussian_log_prob(&mean, &self.log_std, &action);
        Ok((action, lp))
    }
}

pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], x: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(x)
        .map(|((m, s), x)| {
            let z = (x - m) / exp(*s);
            -0.5 * z * z - s - 0.5 * LN_2PI
        })
        .sum()
}

/// `KL(old || new)` between two diagonal Gaussians.
pub fn gaussian_kl(mean_old: &[f64], log_std_old: &[f64], mean_new: &[f64], log_std_new: &[f64]) -> f64 {
    let mut kl = 0.0;
    for d in 0..mean_old.len() {
        let (so, sn) = (log_std_old[d], log_std_new[d]);
        let var_ratio = exp(2.0 * (so - sn));
        let dm = mean_old[d] - mean_new[d];
        kl += sn - so + 0.5 * (var_ratio + dm * dm * exp(-2.0 * sn)) - 0.5;
    }
    kl
}
