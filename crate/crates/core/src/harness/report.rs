use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SweepRow;
use crate::error::{Error, Result};

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub strategy: String,
    pub budget: u64,
    pub count: usize,
    pub failed: usize,
    pub reward: Stat,
    pub mq: Stat,
    pub ta: Stat,
    pub vq: Stat,
    pub r_any: Stat,
    pub nfe_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub cells: Vec<CellSummary>,
    /// Per strategy: is mean reward non-decreasing in budget.
    pub monotone: BTreeMap<String, bool>,
}

/// Aggregate successful rows per (strategy, budget).
pub fn report(rows: &[SweepRow]) -> Result<Summary> {
    let mut groups: BTreeMap<(String, u64), Vec<&SweepRow>> = BTreeMap::new();
    let mut failed: BTreeMap<(String, u64), usize> = BTreeMap::new();
    for r in rows {
        let key = (r.strategy.clone(), r.budget);
        if r.failed || r.reward.is_none() {
            *failed.entry(key).or_default() += 1;
        } else {
            groups.entry(key).or_default().push(r);
        }
    }
    if groups.is_empty() {
        return Err(Error::ReportEmpty);
    }
    let cells: Vec<CellSummary> = groups
        .into_iter()
        .map(|((strategy, budget), rs)| {
            let col = |f: fn(&SweepRow) -> Option<f64>| Stat::of(&rs.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
            CellSummary {
                failed: failed.get(&(strategy.clone(), budget)).copied().unwrap_or(0),
                count: rs.len(),
                reward: col(|r| r.reward),
                mq: col(|r| r.mq),
                ta: col(|r| r.ta),
                vq: col(|r| r.vq),
                r_any: col(|r| r.r_any),
                nfe_mean: rs.iter().map(|r| r.nfe_actual as f64).sum::<f64>() / rs.len() as f64,
                strategy,
                budget,
            }
        })
        .collect();
    let mut monotone = BTreeMap::new();
    for c in &cells {
        monotone.entry(c.strategy.clone()).or_insert(true);
    }
    for (strategy, ok) in monotone.iter_mut() {
        let means: Vec<f64> = cells.iter().filter(|c| &c.strategy == strategy).map(|c| c.reward.mean).collect();
        *ok = means.windows(2).all(|w| w[1] >= w[0]);
    }
    Ok(Summary { cells, monotone })
}

impl Summary {
    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        s.push_str("| strategy | budget | n | failed | reward mean | reward std | MQ | TA | VQ | R_any | NFE |\n");
        s.push_str("|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n");
        for c in &self.cells {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {:.6} | {:.6} | {:.6} | {:.6} | {:.6} | {:.6} | {:.1} |",
                c.strategy, c.budget, c.count, c.failed, c.reward.mean, c.reward.std,
                c.mq.mean, c.ta.mean, c.vq.mean, c.r_any.mean, c.nfe_mean
            );
        }
        s.push_str("\nStandard deviations are population (divide by n).\n\n");
        s.push_str("| strategy | mean reward non-decreasing in budget |\n|---|---|\n");
        for (k, v) in &self.monotone {
            let _ = writeln!(s, "| {k} | {v} |");
        }
        s
    }

    /// Plot-ready table: one line per (strategy, budget).
    pub fn to_plot_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["strategy", "budget", "count", "reward_mean", "reward_std_pop", "mq_mean", "ta_mean", "vq_mean", "r_any_mean"])?;
        for c in &self.cells {
            w.write_record([
                c.strategy.clone(),
                c.budget.to_string(),
                c.count.to_string(),
                c.reward.mean.to_string(),
                c.reward.std.to_string(),
                c.mq.mean.to_string(),
                c.ta.mean.to_string(),
                c.vq.mean.to_string(),
                c.r_any.mean.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }
}

/// Writes `summary.md`, `plot.csv`, and `summary.json` into `dir`.
pub fn write_report(summary: &Summary, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("summary.md"), summary.to_markdown())?;
    std::fs::write(dir.join("plot.csv"), summary.to_plot_csv()?)?;
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(summary)?)?;
    Ok(())
}
