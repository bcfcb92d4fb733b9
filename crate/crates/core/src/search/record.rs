use serde::{Deserialize, Serialize};

use super::SearchConfig;
use crate::rewards::RewardComponents;
use crate::semantics::PromptSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolKind {
    /// Children produced at an imagery or expand step, then pruned.
    Branch,
    /// Particles weighted before resampling.
    Resample,
    /// Completed trajectories scored for the final selection.
    Final,
}

/// One candidate as it appeared in a pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub id: u64,
    pub parent: Option<u64>,
    /// Denoising iterations completed when the pool was formed.
    pub step: usize,
    /// `None` when scoring failed.
    pub reward: Option<f64>,
    /// Lookahead or completion calls spent on this entry.
    pub nfe: u64,
    pub retained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolRecord {
    pub kind: PoolKind,
    pub step: usize,
    /// Calls spent advancing survivors to this step.
    pub advance_nfe: u64,
    /// Calls spent on the shared noise prediction of each branching parent.
    pub branch_nfe: u64,
    pub entries: Vec<PoolEntry>,
}

impl PoolRecord {
    pub fn nfe(&self) -> u64 {
        self.advance_nfe + self.branch_nfe + self.entries.iter().map(|e| e.nfe).sum::<u64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Winner {
    pub id: u64,
    pub parent: Option<u64>,
    /// Initial-noise ancestor of the winning trajectory.
    pub root_id: u64,
    pub child_seed: u64,
    pub x0: Vec<f64>,
    pub reward: f64,
    pub components: RewardComponents,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: SearchConfig,
    pub config_hash: String,
    pub prompt: PromptSpec,
    pub d_sem: f64,
    pub d_sem_degenerate: bool,
    /// Effective pool sizes after distance scaling (imagery only).
    pub scaled_sizes: Vec<usize>,
    pub pools: Vec<PoolRecord>,
    pub nfe_total: u64,
    pub winner: Option<Winner>,
    pub wall_time: f64,
}

impl RunRecord {
    /// Sum of all per-pool charges; equals `nfe_total` for every run.
    pub fn ledger_nfe(&self) -> u64 {
        self.pools.iter().map(PoolRecord::nfe).sum()
    }

    /// JSON with `wall_time` zeroed, for byte comparisons.
    pub fn to_json_masked(&self) -> String {
        let mut r = self.clone();
        r.wall_time = 0.0;
        serde_json::to_string_pretty(&r).expect("record serializes")
    }
}
