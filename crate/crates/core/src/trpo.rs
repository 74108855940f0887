//! Pooled-batch advantage estimation and the trust-region policy step.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math::{all_finite, dot, exp};
use crate::numerics::{conjugate_gradient, DenseMatrix, MlpWorkspace};
use crate::policy::{gaussian_kl, gaussian_log_prob, PolicyParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrpoConfig {
    pub delta_kl: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub cg_iters: usize,
    pub backtrack_steps: usize,
    pub backtrack_ratio: f64,
    pub damping: f64,
    pub normalize_advantages: bool,
    /// Ridge term of the linear value baseline, relative to the mean
    /// diagonal of the normal equations.
    pub baseline_ridge: f64,
}

impl Default for TrpoConfig {
    fn default() -> Self {
        Self {
            delta_kl: 0.01,
            gamma: 0.95,
            gae_lambda: 0.95,
            cg_iters: 10,
            backtrack_steps: 10,
            backtrack_ratio: 0.8,
            damping: 1e-3,
            normalize_advantages: true,
            baseline_ridge: 1e-8,
        }
    }
}

impl TrpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.delta_kl > 0.0 && self.delta_kl.is_finite()) {
            return bad("delta_kl must be positive");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if self.cg_iters == 0 {
            return bad("cg_iters must be >= 1");
        }
        if !(self.backtrack_ratio > 0.0 && self.backtrack_ratio < 1.0) {
            return bad("backtrack_ratio must lie in (0, 1)");
        }
        if !(self.damping >= 0.0 && self.damping.is_finite()) {
            return bad("damping must be >= 0");
        }
        if !(self.baseline_ridge >= 0.0 && self.baseline_ridge.is_finite()) {
            return bad("baseline_ridge must be >= 0");
        }
        Ok(())
    }
}

/// One agent's contiguous run of steps under the shared policy. Actions are
/// the unclamped samples whose log probabilities are stored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AgentSegment {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub log_probs: Vec<f64>,
}

impl AgentSegment {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    fn check(&self) -> Result<()> {
        let n = self.rewards.len();
        Error::check_dim("segment observations", n, self.observations.len())?;
        Error::check_dim("segment actions", n, self.actions.len())?;
        Error::check_dim("segment log probs", n, self.log_probs.len())
    }
}

/// Value predictor used by [`compute_advantages`].
pub trait Baseline {
    fn predict(&self, segment: &AgentSegment, t: usize) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroBaseline;

impl Baseline for ZeroBaseline {
    fn predict(&self, _: &AgentSegment, _: usize) -> f64 {
        0.0
    }
}

impl<F: Fn(&AgentSegment, usize) -> f64> Baseline for F {
    fn predict(&self, segment: &AgentSegment, t: usize) -> f64 {
        self(segment, t)
    }
}

/// Least-squares value fit on observation features, their squares and
/// time features.
///
/// The fit targets returns of rewards centred on their batch mean; the mean
/// comes back through the discounted number of remaining steps, so a constant
/// shift of every reward moves the prediction by exactly its discounted sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearBaseline {
    pub weights: Vec<f64>,
    pub gamma: f64,
    pub reward_mean: f64,
}

impl LinearBaseline {
    fn features(segment: &AgentSegment, t: usize, gamma: f64) -> Vec<f64> {
        let h = segment.len() as f64;
        let s = t as f64 / h;
        let remaining = segment.len() - t;
        let disc = Self::discounted_steps(gamma, remaining);
        let obs = &segment.observations[t];
        let mut f = Vec::with_capacity(2 * obs.len() + 5);
        f.extend_from_slice(obs);
        f.extend(obs.iter().map(|o| o * o));
        f.extend_from_slice(&[s, s * s, s * s * s, disc * (1.0 - gamma), 1.0]);
        f
    }

    fn discounted_steps(gamma: f64, remaining: usize) -> f64 {
        (1.0 - crate::math::powi(gamma, remaining as i32)) / (1.0 - gamma)
    }

    pub fn fit(segments: &[AgentSegment], gamma: f64, ridge: f64) -> Result<Self> {
        let first = segments
            .iter()
            .find(|s| !s.is_empty())
            .ok_or(Error::EmptyBatch("baseline segments"))?;
        let dim = 2 * first.observations[0].len() + 5;
        let mut xtx = DenseMatrix::zeros(dim, dim);
        let mut xty = vec![0.0; dim];
        let count: usize = segments.iter().map(|s| s.len()).sum();
        let reward_mean = segments.iter().flat_map(|s| s.rewards.iter()).sum::<f64>() / count as f64;
        for seg in segments {
            seg.check()?;
            let centred: Vec<f64> = seg.rewards.iter().map(|r| r - reward_mean).collect();
            let (_, returns) = gae(&centred, &vec![0.0; seg.len()], gamma, 1.0);
            for t in 0..seg.len() {
                let f = Self::features(seg, t, gamma);
                Error::check_dim("baseline features", dim, f.len())?;
                for i in 0..dim {
                    xty[i] += f[i] * returns[t];
                    for j in 0..dim {
                        xtx[(i, j)] += f[i] * f[j];
                    }
                }
            }
        }
        let trace: f64 = (0..dim).map(|i| xtx[(i, i)]).sum();
        let lambda = ridge * trace / dim as f64 + 1e-12;
        for i in 0..dim {
            xtx[(i, i)] += lambda;
        }
        let weights = xtx.solve(&xty)?;
        Ok(Self {
            weights,
            gamma,
            reward_mean,
        })
    }
}

impl Baseline for LinearBaseline {
    fn predict(&self, segment: &AgentSegment, t: usize) -> f64 {
        let offset = self.reward_mean * Self::discounted_steps(self.gamma, segment.len() - t);
        dot(&self.weights, &Self::features(segment, t, self.gamma)) + offset
    }
}

/// Generalized advantage estimates and discounted returns of one segment,
/// bootstrapping with zero value past the final step.
pub fn gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut ret = vec![0.0; n];
    let (mut acc, mut g) = (0.0, 0.0);
    for t in (0..n).rev() {
        let next_v = if t + 1 < n { values[t + 1] } else { 0.0 };
        let delta = rewards[t] + gamma * next_v - values[t];
        acc = delta + gamma * lambda * acc;
        g = rewards[t] + gamma * g;
        adv[t] = acc;
        ret[t] = g;
    }
    (adv, ret)
}

/// Every agent's transitions pooled into flat arrays.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransitionBatch {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub observations: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub log_prob_old: Vec<f64>,
    pub value_baseline: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl TransitionBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn observation(&self, i: usize) -> &[f64] {
        &self.observations[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn action(&self, i: usize) -> &[f64] {
        &self.actions[i * self.action_dim..(i + 1) * self.action_dim]
    }
}

pub fn compute_advantages(
    segments: &[AgentSegment],
    baseline: &dyn Baseline,
    config: &TrpoConfig,
) -> Result<TransitionBatch> {
    let first = segments
        .iter()
        .find(|s| !s.is_empty())
        .ok_or(Error::EmptyBatch("trajectories"))?;
    let mut b = TransitionBatch {
        obs_dim: first.observations[0].len(),
        action_dim: first.actions[0].len(),
        ..Default::default()
    };
    for seg in segments {
        seg.check()?;
        let values: Vec<f64> = (0..seg.len()).map(|t| baseline.predict(seg, t)).collect();
        let (adv, ret) = gae(&seg.rewards, &values, config.gamma, config.gae_lambda);
        for t in 0..seg.len() {
            Error::check_dim("observation", b.obs_dim, seg.observations[t].len())?;
            Error::check_dim("action", b.action_dim, seg.actions[t].len())?;
            b.observations.extend_from_slice(&seg.observations[t]);
            b.actions.extend_from_slice(&seg.actions[t]);
        }
        b.rewards.extend_from_slice(&seg.rewards);
        b.log_prob_old.extend_from_slice(&seg.log_probs);
        b.value_baseline.extend_from_slice(&values);
        b.advantages.extend_from_slice(&adv);
        b.returns.extend_from_slice(&ret);
    }
    if !all_finite(&b.advantages) {
        return Err(Error::Numerical("non-finite advantages".into()));
    }
    if config.normalize_advantages {
        normalize(&mut b.advantages);
    }
    Ok(b)
}

fn normalize(v: &mut [f64]) {
    let n = v.len();
    if n < 2 {
        return;
    }
    let m = crate::math::mean(v);
    v.iter_mut().for_each(|x| *x -= m);
    let var = v.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if var > 0.0 {
        let s = crate::math::sqrt(var);
        v.iter_mut().for_each(|x| *x /= s);
    }
}

/// Per-sample forward activations of the pre-step policy.
struct FisherCache {
    workspaces: Vec<MlpWorkspace>,
    means: Vec<Vec<f64>>,
}

impl FisherCache {
    fn new(policy: &PolicyParams, batch: &TransitionBatch) -> Result<Self> {
        let spec = policy.spec();
        let mut workspaces = Vec::with_capacity(batch.len());
        let mut means = Vec::with_capacity(batch.len());
        for i in 0..batch.len() {
            let mut ws = MlpWorkspace::new(spec);
            means.push(ws.forward(spec, policy.params().as_slice(), batch.observation(i))?.to_vec());
            workspaces.push(ws);
        }
        Ok(Self { workspaces, means })
    }

    fn fvp(&mut self, policy: &PolicyParams, v: &[f64], damping: f64) -> Result<Vec<f64>> {
        Error::check_dim("fisher vector", policy.flat_dim(), v.len())?;
        let spec = policy.spec();
        let p = policy.params().as_slice();
        let n = p.len();
        let inv_var: Vec<f64> = policy.log_std().iter().map(|s| exp(-2.0 * s)).collect();
        let scale = 1.0 / self.workspaces.len() as f64;
        let mut out = vec![0.0; v.len()];
        for ws in &mut self.workspaces {
            let jv = ws.jvp(spec, p, &v[..n])?;
            let g: Vec<f64> = jv.iter().zip(&inv_var).map(|(a, b)| a * b).collect();
            ws.backward_accumulate(spec, p, &g, scale, &mut out[..n])?;
        }
        for d in 0..inv_var.len() {
            out[n + d] = 2.0 * v[n + d];
        }
        crate::math::axpy(damping, v, &mut out);
        Ok(out)
    }
}

/// `(F + damping I) v` with `F` the mean Fisher information of the policy
/// over the batch observations, in [`PolicyParams::flat`] coordinates.
pub fn fisher_vector_product(
    policy: &PolicyParams,
    batch: &TransitionBatch,
    v: &[f64],
    damping: f64,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch("transition batch"));
    }
    FisherCache::new(policy, batch)?.fvp(policy, v, damping)
}

/// Importance-sampled surrogate `mean(exp(logp - logp_old) * advantage)`.
pub fn surrogate(policy: &PolicyParams, batch: &TransitionBatch) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch("transition batch"));
    }
    let mut ws = MlpWorkspace::new(policy.spec());
    let mut sum = 0.0;
    for i in 0..batch.len() {
        let mean = ws.forward(policy.spec(), policy.params().as_slice(), batch.observation(i))?;
        let lp = gaussian_log_prob(mean, policy.log_std(), batch.action(i));
        sum += exp(lp - batch.log_prob_old[i]) * batch.advantages[i];
    }
    Ok(sum / batch.len() as f64)
}

/// Gradient of [`surrogate`] in flat coordinates.
pub fn surrogate_gradient(policy: &PolicyParams, batch: &TransitionBatch) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch("transition batch"));
    }
    let mut ws = MlpWorkspace::new(policy.spec());
    let mut g = vec![0.0; policy.flat_dim()];
    let inv_n = 1.0 / batch.len() as f64;
    for i in 0..batch.len() {
        let (obs, act) = (batch.observation(i), batch.action(i));
        let lp = policy.log_prob(obs, act)?;
        let w = exp(lp - batch.log_prob_old[i]) * batch.advantages[i] * inv_n;
        if w != 0.0 {
            policy.accumulate_log_prob_gradient(&mut ws, obs, act, w, &mut g)?;
        }
    }
    Ok(g)
}

fn mean_kl_from(means_old: &[Vec<f64>], log_std_old: &[f64], new: &PolicyParams, batch: &TransitionBatch) -> Result<f64> {
    let mut ws = MlpWorkspace::new(new.spec());
    let mut sum = 0.0;
    for (i, m_old) in means_old.iter().enumerate() {
        let m_new = ws.forward(new.spec(), new.params().as_slice(), batch.observation(i))?;
        sum += gaussian_kl(m_old, log_std_old, m_new, new.log_std());
    }
    Ok(sum / means_old.len() as f64)
}

/// Mean `KL(old || new)` over the batch observations.
pub fn mean_kl(old: &PolicyParams, new: &PolicyParams, batch: &TransitionBatch) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch("transition batch"));
    }
    let means: Vec<Vec<f64>> = (0..batch.len())
        .map(|i| old.mean(batch.observation(i)))
        .collect::<Result<_>>()?;
    mean_kl_from(&means, old.log_std(), new, batch)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrpoReport {
    pub accepted: bool,
    pub kl: f64,
    pub surrogate_before: f64,
    pub surrogate_after: f64,
    pub backtracks: usize,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrpoOutcome {
    pub policy: PolicyParams,
    pub report: TrpoReport,
}

/// Natural-gradient step scaled to the trust-region boundary, followed by a
/// backtracking line search. A step is accepted only if the surrogate
/// strictly improves and the mean KL stays within `delta_kl`; otherwise the
/// input parameters are returned unchanged.
pub fn trpo_step(policy: &PolicyParams, batch: &TransitionBatch, config: &TrpoConfig) -> Result<TrpoOutcome> {
    config.validate()?;
    if batch.is_empty() {
        return Err(Error::EmptyBatch("transition batch"));
    }
    Error::check_dim("batch observations", policy.obs_dim(), batch.obs_dim)?;
    Error::check_dim("batch actions", policy.action_dim(), batch.action_dim)?;
    if !all_finite(&batch.advantages) {
        return Err(Error::Numerical("non-finite advantages".into()));
    }
    let before = surrogate(policy, batch)?;
    let g = surrogate_gradient(policy, batch)?;
    let gradient_norm = crate::math::norm2(&g);
    if !gradient_norm.is_finite() || !before.is_finite() {
        return Err(Error::Numerical(alloc::format!(
            "non-finite policy gradient (norm {gradient_norm}, surrogate {before})"
        )));
    }
    let mut report = TrpoReport {
        accepted: false,
        kl: 0.0,
        surrogate_before: before,
        surrogate_after: before,
        backtracks: 0,
        gradient_norm,
    };
    let unchanged = |report| TrpoOutcome {
        policy: policy.clone(),
        report,
    };
    if gradient_norm == 0.0 {
        return Ok(unchanged(report));
    }

    let mut cache = FisherCache::new(policy, batch)?;
    let dir = conjugate_gradient(|v| cache.fvp(policy, v, config.damping), &g, config.cg_iters, 1e-10)?;
    let curvature = dot(&dir, &cache.fvp(policy, &dir, config.damping)?);
    if !(curvature > 0.0 && curvature.is_finite()) {
        return Err(Error::Numerical(alloc::format!(
            "non-positive curvature {curvature} along the natural gradient"
        )));
    }
    let full_scale = crate::math::sqrt(2.0 * config.delta_kl / curvature);
    let theta = policy.flat();
    let mut scale = full_scale;
    for k in 0..=config.backtrack_steps {
        let mut cand = theta.clone();
        crate::math::axpy(scale, &dir, &mut cand);
        let next = policy.with_flat(&cand)?;
        let after = surrogate(&next, batch)?;
        let kl = mean_kl_from(&cache.means, policy.log_std(), &next, batch)?;
        if after.is_finite() && kl.is_finite() && after > before && kl <= config.delta_kl {
            report.accepted = true;
            report.kl = kl;
            report.surrogate_after = after;
            report.backtracks = k;
            return Ok(TrpoOutcome { policy: next, report });
        }
        scale *= config.backtrack_ratio;
    }
    report.backtracks = config.backtrack_steps;
    Ok(unchanged(report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_returns() {
        let (adv, ret) = gae(&[1.0, 1.0, 1.0], &[0.0; 3], 0.9, 1.0);
        let want = [2.71, 1.9, 1.0];
        for t in 0..3 {
            assert!((ret[t] - want[t]).abs() < 1e-12);
            assert!((adv[t] - want[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn lambda_zero_is_td() {
        let r = [0.3, -1.0, 2.0, 0.5];
        let v = [0.1, 0.7, -0.2, 0.4];
        let (adv, _) = gae(&r, &v, 0.9, 0.0);
        for t in 0..4 {
            let next = if t + 1 < 4 { v[t + 1] } else { 0.0 };
            assert!((adv[t] - (r[t] + 0.9 * next - v[t])).abs() < 1e-12);
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrpoConfig::default().validate().is_ok());
        let c = TrpoConfig {
            delta_kl: 0.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
