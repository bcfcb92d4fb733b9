//! Reward-guided search over denoising trajectories.
//!
//! All strategies share one engine: candidates start from seed-split
//! Gaussian noise, advance by deterministic DDIM, branch through η-mixed
//! steps, and are scored on their deterministic endpoint x̂₀. Every model
//! call, including lookahead rollouts, is charged to the run's NFE total.
//!
//! Schedule entries count denoising iterations from the noise end: entry
//! `s` acts on the state at internal timestep `t = T − s`.

mod engine;
mod plan;
mod record;
mod resample;
mod strategies;

pub use plan::{planned_nfe, NfePlan};
pub use record::{PoolEntry, PoolKind, PoolRecord, RunRecord, Winner};
pub use resample::{softmax_weights, systematic_resample};
pub use strategies::{beam_search, best_of_n, imagery_search, particle_sampling, plain_sample, run_search};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diffusion::{Denoiser, NoiseSchedule, ScheduleKind};
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::rewards::{RewardConfig, RewardModel};
use crate::semantics::{prompt_distance, PromptDistance, PromptSpec};

/// Imagery schedule weighted toward early steps.
pub const SCHEDULE_EARLY: [usize; 4] = [5, 10, 20, 45];
/// Imagery schedule spread evenly over the middle of the trajectory.
pub const SCHEDULE_SPREAD: [usize; 4] = [5, 20, 30, 45];
/// Initial pool followed by one retention size per imagery step.
pub const DEFAULT_SIZE_SCHEDULE: [usize; 5] = [10, 5, 5, 5, 5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Imagery,
    BestOfN,
    Particle,
    Beam,
}

impl Strategy {
    pub fn label(&self) -> &'static str {
        match self {
            Strategy::Imagery => "imagery",
            Strategy::BestOfN => "best-of-n",
            Strategy::Particle => "particle",
            Strategy::Beam => "beam",
        }
    }
}

fn d_n_base() -> usize {
    4
}
fn d_lambda() -> f64 {
    1.0
}
fn d_eta() -> f64 {
    0.5
}
fn d_branch() -> usize {
    2
}
fn d_temperature() -> f64 {
    1.0
}
fn d_steps() -> usize {
    50
}
fn d_sizes() -> Vec<usize> {
    DEFAULT_SIZE_SCHEDULE.to_vec()
}
fn d_schedule() -> Vec<usize> {
    SCHEDULE_SPREAD.to_vec()
}

/// One search configuration.
///
/// `imagery_schedule` doubles as the resample steps of particle sampling and
/// the expand steps of beam search. `n_base` is N for best-of-N, the particle
/// count, and the beam width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub strategy: Strategy,
    #[serde(default = "d_n_base")]
    pub n_base: usize,
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    #[serde(default = "d_schedule")]
    pub imagery_schedule: Vec<usize>,
    #[serde(default = "d_sizes")]
    pub size_schedule: Vec<usize>,
    #[serde(default = "d_eta")]
    pub eta_branch: f64,
    #[serde(default = "d_steps")]
    pub steps: usize,
    #[serde(default)]
    pub schedule_kind: ScheduleKind,
    #[serde(default = "d_branch")]
    pub branch_factor: usize,
    #[serde(default = "d_temperature")]
    pub temperature: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SearchConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            n_base: d_n_base(),
            lambda: d_lambda(),
            imagery_schedule: d_schedule(),
            size_schedule: d_sizes(),
            eta_branch: d_eta(),
            steps: d_steps(),
            schedule_kind: ScheduleKind::default(),
            branch_factor: d_branch(),
            temperature: d_temperature(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.steps;
        if t < 2 {
            return Err(Error::config("steps must be >= 2"));
        }
        let mut prev = 0;
        for &s in &self.imagery_schedule {
            if s < 1 || s >= t {
                return Err(Error::config(format!("schedule step {s} outside [1, {}]", t - 1)));
            }
            if s <= prev {
                return Err(Error::config("imagery schedule must be strictly increasing"));
            }
            prev = s;
        }
        if !(self.eta_branch > 0.0 && self.eta_branch <= 1.0) {
            return Err(Error::config(format!("eta_branch {} outside (0, 1]", self.eta_branch)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("lambda must be finite and >= 0"));
        }
        match self.strategy {
            Strategy::Imagery => {
                if self.size_schedule.len() != self.imagery_schedule.len() + 1 {
                    return Err(Error::config(format!(
                        "size schedule needs {} entries for {} imagery steps",
                        self.imagery_schedule.len() + 1,
                        self.imagery_schedule.len()
                    )));
                }
                if self.size_schedule.contains(&0) {
                    return Err(Error::config("size schedule entries must be >= 1"));
                }
            }
            Strategy::Beam if self.branch_factor == 0 => {
                return Err(Error::config("branch_factor must be >= 1"))
            }
            Strategy::Particle if !(self.temperature > 0.0) => {
                return Err(Error::config("temperature must be > 0"))
            }
            _ => {}
        }
        if self.strategy != Strategy::Imagery && self.n_base == 0 {
            return Err(Error::config("n_base must be >= 1"));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// ceil(n_base · (1 + λ·d_sem)), ignoring float noise below 1e-9.
pub fn candidate_count(n_base: usize, lambda: f64, d_sem: f64) -> usize {
    let x = n_base as f64 * (1.0 + lambda * d_sem);
    let n = (x - 1e-9 * x.max(1.0)).ceil();
    (n as usize).max(1)
}

/// Everything a strategy needs besides its own configuration.
#[derive(Clone, Copy)]
pub struct SearchContext<'a> {
    pub model: &'a dyn Denoiser,
    pub schedule: &'a NoiseSchedule,
    pub reward: &'a dyn RewardModel,
    pub weights: &'a RewardConfig,
    pub prompt: &'a PromptSpec,
    pub distance: PromptDistance,
}

impl<'a> SearchContext<'a> {
    pub fn new(
        model: &'a dyn Denoiser,
        schedule: &'a NoiseSchedule,
        reward: &'a dyn RewardModel,
        weights: &'a RewardConfig,
        prompt: &'a PromptSpec,
        table: Option<&EmbeddingTable>,
    ) -> Result<Self> {
        weights.validate()?;
        let distance = prompt_distance(prompt, table)?;
        Ok(Self { model, schedule, reward, weights, prompt, distance })
    }
}
