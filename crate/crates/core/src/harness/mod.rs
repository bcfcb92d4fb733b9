//! Configuration loading, single runs, budgeted sweeps, and reports.

mod report;
mod sweep;

pub use report::{report, write_report, CellSummary, Stat, Summary};
pub use sweep::{derive_config, read_rows, rows_to_csv, run_sweep, write_rows, SweepRow};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diffusion::{GaussianMixtureTarget, MixtureDenoiser, NoiseSchedule};
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::rewards::{AnalyticReward, ExternalReward, RewardConfig, RewardModel, DEFAULT_CLIP};
use crate::search::{run_search, RunRecord, SearchConfig, SearchContext};
use crate::semantics::PromptSpec;

/// Environment variable that overrides the sweep output directory.
pub const OUTPUT_DIR_ENV: &str = "IMAGERY_OUTPUT_DIR";

fn default_clip() -> f64 {
    DEFAULT_CLIP
}

fn default_timeout() -> f64 {
    30.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RewardSpec {
    Analytic {
        #[serde(default)]
        mode_index: usize,
        #[serde(default = "default_clip")]
        clip: f64,
    },
    External {
        command: Vec<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: f64,
    },
}

impl Default for RewardSpec {
    fn default() -> Self {
        RewardSpec::Analytic { mode_index: 0, clip: DEFAULT_CLIP }
    }
}

impl RewardSpec {
    pub fn build(&self, target: &GaussianMixtureTarget) -> Result<Box<dyn RewardModel>> {
        Ok(match self {
            RewardSpec::Analytic { mode_index, clip } => {
                let mut r = AnalyticReward::new(target.clone(), *mode_index)?;
                r.clip = *clip;
                Box::new(r)
            }
            RewardSpec::External { command, timeout_secs } => {
                if command.is_empty() {
                    return Err(Error::config("external reward command is empty"));
                }
                Box::new(ExternalReward { command: command.clone(), timeout_secs: *timeout_secs })
            }
        })
    }
}

/// Config file for `search run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub search: SearchConfig,
    #[serde(default)]
    pub weights: RewardConfig,
    pub target: PathBuf,
    #[serde(default)]
    pub table: Option<PathBuf>,
    #[serde(default)]
    pub reward: RewardSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelledSearch {
    pub label: String,
    pub search: SearchConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PromptSource {
    Inline(Vec<PromptSpec>),
    File(PathBuf),
}

/// Config file for `sweep run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target: PathBuf,
    #[serde(default)]
    pub table: Option<PathBuf>,
    #[serde(default)]
    pub weights: RewardConfig,
    #[serde(default)]
    pub reward: RewardSpec,
    pub prompts: PromptSource,
    pub searches: Vec<LabelledSearch>,
    pub budgets: Vec<u64>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Reads a prompt file holding one prompt, an array, or a suite manifest.
pub fn load_prompts(path: &Path) -> Result<Vec<PromptSpec>> {
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let prompts: Vec<PromptSpec> = match value {
        serde_json::Value::Array(_) => serde_json::from_value(value)?,
        serde_json::Value::Object(ref m) if m.contains_key("prompts") => {
            serde_json::from_value(m["prompts"].clone())?
        }
        other => vec![serde_json::from_value(other)?],
    };
    for p in &prompts {
        p.validate()?;
    }
    Ok(prompts)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let mut c: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let base = config_dir(path);
        c.target = resolve(&base, &c.target);
        c.table = c.table.map(|t| resolve(&base, &t));
        c.search.validate()?;
        c.weights.validate()?;
        Ok(c)
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let mut c: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let base = config_dir(path);
        c.target = resolve(&base, &c.target);
        c.table = c.table.map(|t| resolve(&base, &t));
        if let PromptSource::File(p) = &c.prompts {
            c.prompts = PromptSource::File(resolve(&base, p));
        }
        c.output_dir = c.output_dir.map(|o| resolve(&base, &o));
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("sweep needs at least one seed"));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::config("sweep seeds must be unique"));
        }
        if self.budgets.is_empty() || self.budgets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("budgets must be nonempty and strictly increasing"));
        }
        if self.searches.is_empty() {
            return Err(Error::config("sweep needs at least one search"));
        }
        let mut labels: Vec<&str> = self.searches.iter().map(|s| s.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("search labels must be unique"));
        }
        for s in &self.searches {
            s.search.validate()?;
        }
        self.weights.validate()?;
        if !self.target.exists() {
            return Err(Error::config(format!("target file {} not found", self.target.display())));
        }
        if let Some(t) = &self.table {
            if !t.exists() {
                return Err(Error::config(format!("table file {} not found", t.display())));
            }
        }
        Ok(())
    }

    pub fn prompts(&self) -> Result<Vec<PromptSpec>> {
        let prompts = match &self.prompts {
            PromptSource::Inline(p) => p.clone(),
            PromptSource::File(path) => load_prompts(path)?,
        };
        if prompts.is_empty() {
            return Err(Error::config("sweep needs at least one prompt"));
        }
        for p in &prompts {
            p.validate()?;
        }
        Ok(prompts)
    }
}

/// Loaded inputs shared by every run of a sweep or single search.
pub struct Resources {
    pub target: GaussianMixtureTarget,
    pub table: Option<EmbeddingTable>,
    pub weights: RewardConfig,
    pub reward: Box<dyn RewardModel>,
}

impl Resources {
    pub fn load(target: &Path, table: Option<&Path>, weights: RewardConfig, reward: &RewardSpec) -> Result<Self> {
        let target = GaussianMixtureTarget::load(target)?;
        let table = table.map(EmbeddingTable::load).transpose()?;
        let reward = reward.build(&target)?;
        Ok(Self { target, table, weights, reward })
    }

    /// Runs `config` on `prompt` with the analytic mixture denoiser.
    pub fn run(&self, config: &SearchConfig, prompt: &PromptSpec) -> Result<RunRecord> {
        let schedule = NoiseSchedule::new(config.steps, config.schedule_kind)?;
        let model = MixtureDenoiser::new(self.target.clone(), schedule.clone());
        let ctx = SearchContext::new(&model, &schedule, self.reward.as_ref(), &self.weights, prompt, self.table.as_ref())?;
        run_search(config, ctx)
    }
}

/// Builds a worker pool of the requested size (0 means rayon's default).
pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config(format!("cannot build worker pool: {e}")))
}
