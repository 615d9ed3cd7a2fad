use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GrpoError {
    #[error("a group needs at least 2 responses, got {0}")]
    GroupTooSmall(usize),
    #[error("{what}: expected length {expected}, got {found}")]
    LengthMismatch { what: &'static str, expected: usize, found: usize },
    #[error("probabilities must be finite and non-negative (entry {index} is {value})")]
    BadProbability { index: usize, value: f64 },
    #[error("probabilities sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("denominator probability {value} is below the floor {floor}")]
    Guard { value: f64, floor: f64 },
    #[error("{0}")]
    Domain(String),
    #[error("advantages have not been computed for this group")]
    MissingAdvantages,
    #[error("response {response} is outside a policy over {size} responses")]
    ResponseOutOfRange { response: usize, size: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

const SUM_TOLERANCE: f64 = 1e-12;

/// A distribution over a finite response alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PolicyDist {
    probs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for PolicyDist {
    type Error = GrpoError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        PolicyDist::new(v)
    }
}

impl From<PolicyDist> for Vec<f64> {
    fn from(p: PolicyDist) -> Self {
        p.probs
    }
}

impl PolicyDist {
    pub fn new(probs: Vec<f64>) -> Result<Self, GrpoError> {
        if let Some((index, &value)) = probs.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < 0.0) {
            return Err(GrpoError::BadProbability { index, value });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(GrpoError::NotNormalized(sum));
        }
        Ok(Self { probs })
    }

    /// Softmax of `logits`, shifted by the maximum for stability.
    pub fn softmax(logits: &[f64]) -> Self {
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
        let z: f64 = e.iter().sum();
        Self { probs: e.into_iter().map(|x| x / z).collect() }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    fn at(&self, response: usize) -> Result<f64, GrpoError> {
        self.probs.get(response).copied().ok_or(GrpoError::ResponseOutOfRange { response, size: self.probs.len() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrpoConfig {
    /// Clip half-width ε > 0.
    pub epsilon: f64,
    /// KL weight β ≥ 0.
    pub beta: f64,
    /// Responses sampled per prompt, ≥ 2.
    pub group_size: usize,
    /// Lower bound on the reward standard deviation used for normalization.
    pub std_floor: f64,
    /// Smallest old-policy probability accepted as a ratio denominator.
    pub ratio_floor: f64,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        Self { epsilon: 0.2, beta: 0.04, group_size: 8, std_floor: 1e-8, ratio_floor: 1e-12 }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<(), GrpoError> {
        let bad = |m: &str| Err(GrpoError::InvalidConfig(m.to_string()));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta must be non-negative");
        }
        if self.group_size < 2 {
            return bad("group_size must be at least 2");
        }
        if !(self.std_floor > 0.0) || !(self.ratio_floor > 0.0) {
            return bad("floors must be positive");
        }
        Ok(())
    }
}

/// Sampled responses for one prompt with their rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseGroup {
    /// Indices into the response alphabet of the policies.
    pub responses: Vec<usize>,
    pub rewards: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub advantages: Option<Vec<f64>>,
}

impl ResponseGroup {
    pub fn new(responses: Vec<usize>, rewards: Vec<f64>) -> Result<Self, GrpoError> {
        if responses.len() != rewards.len() {
            return Err(GrpoError::LengthMismatch { what: "rewards", expected: responses.len(), found: rewards.len() });
        }
        if responses.len() < 2 {
            return Err(GrpoError::GroupTooSmall(responses.len()));
        }
        Ok(Self { responses, rewards, advantages: None })
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn normalize(&mut self, std_floor: f64) -> Result<&[f64], GrpoError> {
        self.advantages = Some(compute_advantages(&self.rewards, std_floor)?);
        Ok(self.advantages.as_deref().unwrap())
    }
}

/// `A_i = (r_i − mean) / max(σ, std_floor)` with the population standard
/// deviation σ. Groups of identical rewards give all-zero advantages.
pub fn compute_advantages(rewards: &[f64], std_floor: f64) -> Result<Vec<f64>, GrpoError> {
    let g = rewards.len();
    if g < 2 {
        return Err(GrpoError::GroupTooSmall(g));
    }
    if rewards.iter().all(|&r| r == rewards[0]) {
        return Ok(vec![0.0; g]);
    }
    let n = g as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    let std = var.sqrt().max(std_floor);
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}

pub fn probability_ratio(p_new: f64, p_old: f64, floor: f64) -> Result<f64, GrpoError> {
    if !(p_old >= floor) {
        return Err(GrpoError::Guard { value: p_old, floor });
    }
    Ok(p_new / p_old)
}

/// `min(ratio·A, clip(ratio, 1−ε, 1+ε)·A)`.
pub fn clipped_term(ratio: f64, advantage: f64, epsilon: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

/// Exact `Σ p_i ln(p_i / q_i)` with `0 · ln(0/q) = 0`.
pub fn kl_divergence(p: &PolicyDist, q: &PolicyDist) -> Result<f64, GrpoError> {
    if p.len() != q.len() {
        return Err(GrpoError::Domain(format!("support sizes differ: {} vs {}", p.len(), q.len())));
    }
    let mut kl = 0.0;
    for (i, (&pi, &qi)) in p.probs.iter().zip(&q.probs).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi <= 0.0 {
            return Err(GrpoError::Domain(format!("q[{i}] = 0 where p[{i}] = {pi}")));
        }
        kl += pi * (pi / qi).ln();
    }
    Ok(kl)
}

/// `(1/G) Σ clipped_term(π_new(y_i)/π_old(y_i), A_i, ε) − β · KL(π_new ‖ π_ref)`.
pub fn grpo_objective(
    group: &ResponseGroup,
    config: &GrpoConfig,
    new: &PolicyDist,
    old: &PolicyDist,
    reference: &PolicyDist,
) -> Result<f64, GrpoError> {
    let adv = group.advantages.as_ref().ok_or(GrpoError::MissingAdvantages)?;
    if adv.len() != group.len() {
        return Err(GrpoError::LengthMismatch { what: "advantages", expected: group.len(), found: adv.len() });
    }
    if group.len() < 2 {
        return Err(GrpoError::GroupTooSmall(group.len()));
    }
    if new.len() != old.len() {
        return Err(GrpoError::Domain(format!("support sizes differ: {} vs {}", new.len(), old.len())));
    }
    let mut sum = 0.0;
    for (&y, &a) in group.responses.iter().zip(adv) {
        let ratio = probability_ratio(new.at(y)?, old.at(y)?, config.ratio_floor)?;
        sum += clipped_term(ratio, a, config.epsilon);
    }
    let kl = if config.beta == 0.0 { 0.0 } else { kl_divergence(new, reference)? };
    Ok(sum / group.len() as f64 - config.beta * kl)
}

/// Average objective over several prompts' groups, each with its own policies.
pub fn mean_objective<'a>(
    groups: impl IntoIterator<Item = (&'a ResponseGroup, &'a PolicyDist, &'a PolicyDist, &'a PolicyDist)>,
    config: &GrpoConfig,
) -> Result<f64, GrpoError> {
    let mut total = 0.0;
    let mut n = 0usize;
    for (g, new, old, reference) in groups {
        total += grpo_objective(g, config, new, old, reference)?;
        n += 1;
    }
    if n == 0 {
        return Err(GrpoError::Domain("no groups".into()));
    }
    Ok(total / n as f64)
}
