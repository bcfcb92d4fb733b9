//! Adaptive imagery reward: a weighted sum of component scores multiplied by
//! the prompt's semantic distance.

mod analytic;
mod external;

pub use analytic::{analytic_reward, AnalyticReward, DEFAULT_CLIP};
pub use external::{external_reward, ExternalReward};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semantics::PromptSpec;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardComponents {
    pub mq: f64,
    pub ta: f64,
    pub vq: f64,
    pub r_any: f64,
}

impl RewardComponents {
    pub fn is_finite(&self) -> bool {
        [self.mq, self.ta, self.vq, self.r_any].iter().all(|v| v.is_finite())
    }
}

/// Scaling factors of the weighted sum, as resolved for one prompt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub omega: f64,
}

fn one() -> f64 {
    1.0
}

fn default_floor() -> f64 {
    1e-3
}

/// Weights file. β and γ default to 1, ω to 0; α is resolved per prompt by
/// [`dynamic_alpha`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    #[serde(default = "one")]
    pub alpha_base: f64,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default)]
    pub omega: f64,
    #[serde(default = "default_floor")]
    pub d_floor: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { alpha_base: 1.0, kappa: 1.0, beta: 1.0, gamma: 1.0, omega: 0.0, d_floor: 1e-3 }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        let vals = [self.alpha_base, self.kappa, self.beta, self.gamma, self.omega, self.d_floor];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("reward weights must be finite"));
        }
        if self.d_floor <= 0.0 {
            return Err(Error::config("d_floor must be > 0"));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        c.validate()?;
        Ok(c)
    }

    pub fn weights_for(&self, d_sem: f64) -> RewardWeights {
        RewardWeights {
            alpha: dynamic_alpha(d_sem, self.alpha_base, self.kappa),
            beta: self.beta,
            gamma: self.gamma,
            omega: self.omega,
        }
    }

    /// Full reward of `components` for a prompt at distance `d_sem`.
    pub fn score(&self, components: &RewardComponents, d_sem: f64) -> f64 {
        reward_air(components, &self.weights_for(d_sem), d_sem, self.d_floor)
    }
}

/// α = alpha_base · (1 + κ·d_sem).
pub fn dynamic_alpha(d_sem: f64, alpha_base: f64, kappa: f64) -> f64 {
    alpha_base * (1.0 + kappa * d_sem)
}

/// (α·MQ + β·TA + γ·VQ + ω·R_any) · max(d_sem, d_floor).
///
/// Non-finite inputs yield −∞ so the candidate ranks last.
pub fn reward_air(components: &RewardComponents, weights: &RewardWeights, d_sem: f64, d_floor: f64) -> f64 {
    if !components.is_finite() || !d_sem.is_finite() {
        return f64::NEG_INFINITY;
    }
    let sum = weights.alpha * components.mq
        + weights.beta * components.ta
        + weights.gamma * components.vq
        + weights.omega * components.r_any;
    sum * d_sem.max(d_floor)
}

/// Scores a final (or lookahead) sample for a prompt.
pub trait RewardModel: Send + Sync {
    fn score(&self, x0: &[f64], prompt: &PromptSpec) -> Result<RewardComponents>;
}
