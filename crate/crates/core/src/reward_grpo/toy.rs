//! A softmax policy over a finite response set, used to check the analytic
//! objective gradient against central finite differences.

use super::grpo::{clipped_term, grpo_objective, GrpoConfig, GrpoError, PolicyDist, ResponseGroup};
use crate::seeding::rng;
use rand::Rng;

/// Fixed old/reference policies and a fixed normalized group; the objective
/// is a deterministic function of the new policy's logits.
#[derive(Debug, Clone)]
pub struct ToyProblem {
    pub old: PolicyDist,
    pub reference: PolicyDist,
    pub group: ResponseGroup,
    pub config: GrpoConfig,
}

#[derive(Debug, Clone)]
pub struct GradientCheck {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    /// `max_k |a_k − n_k| / max(|a_k|, |n_k|, 1e-6)`.
    pub max_rel_error: f64,
}

/// Draws `size` responses from `policy` by inverse-CDF sampling.
pub fn sample_group(policy: &PolicyDist, size: usize, seed: u64) -> Vec<usize> {
    let mut r = rng(seed);
    let probs = policy.probs();
    (0..size)
        .map(|_| {
            let u: f64 = r.random();
            let mut acc = 0.0;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    return i;
                }
            }
            probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
        })
        .collect()
}

impl ToyProblem {
    /// Samples a group of `config.group_size` responses from `old`, rewards each
    /// with `reward_of[response]` and normalizes advantages.
    pub fn sample(
        old: PolicyDist,
        reference: PolicyDist,
        reward_of: &[f64],
        config: GrpoConfig,
        seed: u64,
    ) -> Result<Self, GrpoError> {
        config.validate()?;
        if reward_of.len() != old.len() || reference.len() != old.len() {
            return Err(GrpoError::LengthMismatch { what: "response alphabet", expected: old.len(), found: reward_of.len() });
        }
        let responses = sample_group(&old, config.group_size, seed);
        let rewards = responses.iter().map(|&y| reward_of[y]).collect();
        let mut group = ResponseGroup::new(responses, rewards)?;
        group.normalize(config.std_floor)?;
        Ok(Self { old, reference, group, config })
    }

    pub fn objective(&self, theta: &[f64]) -> Result<f64, GrpoError> {
        grpo_objective(&self.group, &self.config, &PolicyDist::softmax(theta), &self.old, &self.reference)
    }

    /// Gradient of the surrogate term alone.
    pub fn surrogate_gradient(&self, theta: &[f64]) -> Result<Vec<f64>, GrpoError> {
        let pi = PolicyDist::softmax(theta);
        let pi = pi.probs();
        let adv = self.group.advantages.as_ref().ok_or(GrpoError::MissingAdvantages)?;
        let eps = self.config.epsilon;
        let mut grad = vec![0.0; theta.len()];
        for (&y, &a) in self.group.responses.iter().zip(adv) {
            let old = self.old.probs()[y];
            let ratio = pi[y] / old;
            // The unclipped branch carries the gradient; the clipped one is constant.
            if ratio * a > clipped_term(ratio, a, eps) {
                continue;
            }
            for (k, g) in grad.iter_mut().enumerate() {
                let delta = if k == y { 1.0 } else { 0.0 };
                *g += a * pi[y] * (delta - pi[k]) / old;
            }
        }
        let n = self.group.len() as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        Ok(grad)
    }

    /// Gradient of `KL(softmax(θ) ‖ reference)`.
    pub fn kl_gradient(&self, theta: &[f64]) -> Vec<f64> {
        let pi = PolicyDist::softmax(theta);
        let pi = pi.probs();
        let log_ratio: Vec<f64> = pi.iter().zip(self.reference.probs()).map(|(p, r)| (p / r).ln()).collect();
        let mean: f64 = pi.iter().zip(&log_ratio).map(|(p, l)| p * l).sum();
        pi.iter().zip(&log_ratio).map(|(p, l)| p * (l - mean)).collect()
    }

    pub fn gradient(&self, theta: &[f64]) -> Result<Vec<f64>, GrpoError> {
        let mut grad = self.surrogate_gradient(theta)?;
        if self.config.beta != 0.0 {
            for (g, k) in grad.iter_mut().zip(self.kl_gradient(theta)) {
                *g -= self.config.beta * k;
            }
        }
        Ok(grad)
    }
}

/// Compares the analytic gradient with central differences of the objective.
pub fn grpo_gradient_check(theta: &[f64], problem: &ToyProblem, step: f64) -> Result<GradientCheck, GrpoError> {
    if theta.len() != problem.old.len() {
        return Err(GrpoError::LengthMismatch { what: "theta", expected: problem.old.len(), found: theta.len() });
    }
    let analytic = problem.gradient(theta)?;
    let mut numeric = Vec::with_capacity(theta.len());
    let mut probe = theta.to_vec();
    for k in 0..theta.len() {
        probe[k] = theta[k] + step;
        let up = problem.objective(&probe)?;
        probe[k] = theta[k] - step;
        let down = problem.objective(&probe)?;
        probe[k] = theta[k];
        numeric.push((up - down) / (2.0 * step));
    }
    let max_rel_error = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max);
    Ok(GradientCheck { analytic, numeric, max_rel_error })
}
