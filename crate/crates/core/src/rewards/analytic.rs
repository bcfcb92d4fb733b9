use super::{RewardComponents, RewardModel};
use crate::diffusion::GaussianMixtureTarget;
use crate::error::{Error, Result};
use crate::semantics::PromptSpec;

/// Default range beyond which `vq` starts penalizing.
pub const DEFAULT_CLIP: f64 = 6.0;

/// Analytic stand-ins for the learned scorers:
///
/// * `mq` log-density of `x0` under the target
/// * `ta` negative distance from `x0` to the designated mode mean
/// * `vq` −max(0, ‖x0‖∞ − clip)
/// * `r_any` 0
pub fn analytic_reward(
    x0: &[f64],
    target: &GaussianMixtureTarget,
    mode_index: usize,
    clip: f64,
) -> Result<RewardComponents> {
    let mode = target.components.get(mode_index).ok_or_else(|| {
        Error::config(format!("mode {mode_index} out of range for {} components", target.components.len()))
    })?;
    if x0.len() != target.dim {
        return Err(Error::input(format!("sample dim {} != target dim {}", x0.len(), target.dim)));
    }
    let ta = -x0
        .iter()
        .zip(&mode.mu)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let inf_norm = x0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(RewardComponents {
        mq: target.log_density(x0),
        ta,
        vq: -(inf_norm - clip).max(0.0),
        r_any: 0.0,
    })
}

#[derive(Debug, Clone)]
pub struct AnalyticReward {
    pub target: GaussianMixtureTarget,
    pub mode_index: usize,
    pub clip: f64,
}

impl AnalyticReward {
    pub fn new(target: GaussianMixtureTarget, mode_index: usize) -> Result<Self> {
        if mode_index >= target.components.len() {
            return Err(Error::config(format!("mode {mode_index} out of range")));
        }
        Ok(Self { target, mode_index, clip: DEFAULT_CLIP })
    }
}

impl RewardModel for AnalyticReward {
    fn score(&self, x0: &[f64], _prompt: &PromptSpec) -> Result<RewardComponents> {
        analytic_reward(x0, &self.target, self.mode_index, self.clip)
    }
}
