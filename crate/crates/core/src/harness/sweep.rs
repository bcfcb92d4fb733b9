use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, Resources};
use crate::error::{Error, Result};
use crate::search::{planned_nfe, SearchConfig, Strategy};
use crate::semantics::prompt_distance;

/// One (search, budget, seed, prompt) cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub strategy: String,
    pub budget: u64,
    pub seed: u64,
    pub prompt: usize,
    pub d_sem: f64,
    pub reward: Option<f64>,
    pub mq: Option<f64>,
    pub ta: Option<f64>,
    pub vq: Option<f64>,
    pub r_any: Option<f64>,
    pub nfe_actual: u64,
    pub wall_time: f64,
    pub failed: bool,
    pub error: String,
}

const MAX_SCALE: usize = 1 << 16;

/// Largest `k` in `1..=MAX_SCALE` for which `fits(k)` holds, assuming `fits`
/// is monotone (true up to some point, false after).
fn largest_fitting(mut fits: impl FnMut(usize) -> bool) -> Option<usize> {
    if !fits(1) {
        return None;
    }
    let (mut lo, mut hi) = (1, 2);
    while hi <= MAX_SCALE && fits(hi) {
        lo = hi;
        hi *= 2;
    }
    let mut hi = hi.min(MAX_SCALE + 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Derive a configuration from `base` whose NFE stays within `budget`.
///
/// * best-of-n: N = ⌊budget / T⌋.
/// * beam / particle: the largest width (or particle count) that fits.
/// * imagery: size schedule `[p, r, .., r]` with the widest pool `p` that
///   still leaves room for branching (`r < p`, smallest `r` that fits).
///   When no `p >= 2` admits branching, the widest pool with `r = p`.
///   Distance scaling is applied on top of both entries.
///
/// When even the smallest pool overshoots, the earliest schedule steps are
/// dropped one at a time. Returns `None` if no configuration fits: when
/// `budget < T`, or for imagery when `budget < T * ceil(1 + lambda * d_sem)`.
pub fn derive_config(base: &SearchConfig, budget: u64, d_sem: f64) -> Option<SearchConfig> {
    let t = base.steps as u64;
    if base.strategy == Strategy::BestOfN {
        let n = (budget / t) as usize;
        return (n >= 1).then(|| SearchConfig { n_base: n, ..base.clone() });
    }
    let fits = |c: &SearchConfig| planned_nfe(c, d_sem).nfe <= budget;
    for drop in 0..=base.imagery_schedule.len() {
        let mut cfg = base.clone();
        cfg.imagery_schedule = base.imagery_schedule[drop..].to_vec();
        if base.strategy == Strategy::Imagery {
            let with = |p: usize, r: usize| {
                let mut c = cfg.clone();
                c.size_schedule = std::iter::once(p).chain(std::iter::repeat_n(r, c.imagery_schedule.len())).collect();
                c
            };
            // Retention only lowers cost, so r = p is the cheapest pool of width p.
            let Some(widest) = largest_fitting(|p| fits(&with(p, p))) else {
                continue;
            };
            let smallest_r = |p: usize| (1..p).find(|&r| fits(&with(p, r)));
            let branching = (2..=widest).rev().find_map(|p| smallest_r(p).map(|r| (p, r)));
            let (p, r) = match branching {
                Some(pr) if !cfg.imagery_schedule.is_empty() => pr,
                _ => (widest, widest),
            };
            return Some(with(p, r));
        }
        let found = largest_fitting(|n| {
            let mut c = cfg.clone();
            c.n_base = n;
            fits(&c)
        });
        if let Some(n) = found {
            cfg.n_base = n;
            return Some(cfg);
        }
    }
    None
}

#[derive(Debug, Clone)]
struct Cell {
    search: usize,
    budget: u64,
    seed: u64,
    prompt: usize,
}

/// Writes rows in canonical order as soon as every earlier row is done.
struct OrderedWriter {
    out: Option<csv::Writer<File>>,
    pending: BTreeMap<usize, SweepRow>,
    next: usize,
    rows: Vec<SweepRow>,
}

impl OrderedWriter {
    fn push(&mut self, index: usize, row: SweepRow) -> Result<()> {
        self.pending.insert(index, row);
        while let Some(row) = self.pending.remove(&self.next) {
            if let Some(w) = self.out.as_mut() {
                w.serialize(&row)?;
                w.flush()?;
            }
            self.rows.push(row);
            self.next += 1;
        }
        Ok(())
    }
}

fn failed_row(label: &str, cell: &Cell, d_sem: f64, error: String) -> SweepRow {
    SweepRow {
        strategy: label.to_string(),
        budget: cell.budget,
        seed: cell.seed,
        prompt: cell.prompt,
        d_sem,
        reward: None,
        mq: None,
        ta: None,
        vq: None,
        r_any: None,
        nfe_actual: 0,
        wall_time: 0.0,
        failed: true,
        error,
    }
}

/// Runs every (search, budget, seed, prompt) cell. Rows come back sorted by
/// (label, budget, seed, prompt) and, when `rows_path` is given, are
/// appended to that CSV in the same order as they complete.
///
/// Cells run on the current rayon pool; install a sized pool to bound workers.
pub fn run_sweep(config: &ExperimentConfig, rows_path: Option<&Path>) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let prompts = config.prompts()?;
    let resources = Resources::load(&config.target, config.table.as_deref(), config.weights, &config.reward)?;
    let distances = prompts
        .iter()
        .map(|p| prompt_distance(p, resources.table.as_ref()).map(|d| d.value))
        .collect::<Result<Vec<_>>>()?;

    let mut order: Vec<usize> = (0..config.searches.len()).collect();
    order.sort_by(|&a, &b| config.searches[a].label.cmp(&config.searches[b].label));
    let mut seeds = config.seeds.clone();
    seeds.sort_unstable();
    let cells: Vec<Cell> = order
        .iter()
        .flat_map(|&search| {
            let seeds = &seeds;
            let n_prompts = prompts.len();
            config.budgets.iter().flat_map(move |&budget| {
                seeds.iter().flat_map(move |&seed| {
                    (0..n_prompts).map(move |prompt| Cell { search, budget, seed, prompt })
                })
            })
        })
        .collect();

    let out = match rows_path {
        Some(p) => {
            if let Some(dir) = p.parent() {
                std::fs::create_dir_all(dir)?;
            }
            Some(csv::Writer::from_path(p)?)
        }
        None => None,
    };
    let writer = Mutex::new(OrderedWriter { out, pending: BTreeMap::new(), next: 0, rows: Vec::new() });

    cells.par_iter().enumerate().try_for_each(|(index, cell)| -> Result<()> {
        let labelled = &config.searches[cell.search];
        let d_sem = distances[cell.prompt];
        let row = match derive_config(&labelled.search, cell.budget, d_sem) {
            None => failed_row(
                &labelled.label,
                cell,
                d_sem,
                format!("budget {} cannot fit the smallest {} pool at d_sem {d_sem}", cell.budget, labelled.search.strategy.label()),
            ),
            Some(mut search) => {
                search.seed = cell.seed;
                match resources.run(&search, &prompts[cell.prompt]) {
                    Ok(record) => {
                        let w = record.winner.as_ref().expect("successful runs have a winner");
                        SweepRow {
                            strategy: labelled.label.clone(),
                            budget: cell.budget,
                            seed: cell.seed,
                            prompt: cell.prompt,
                            d_sem: record.d_sem,
                            reward: Some(w.reward),
                            mq: Some(w.components.mq),
                            ta: Some(w.components.ta),
                            vq: Some(w.components.vq),
                            r_any: Some(w.components.r_any),
                            nfe_actual: record.nfe_total,
                            wall_time: record.wall_time,
                            failed: false,
                            error: String::new(),
                        }
                    }
                    Err(Error::SearchFailed { record, .. }) => {
                        let mut row = failed_row(&labelled.label, cell, d_sem, "every candidate failed".into());
                        row.nfe_actual = record.nfe_total;
                        row
                    }
                    Err(e) => failed_row(&labelled.label, cell, d_sem, e.to_string()),
                }
            }
        };
        if row.failed {
            log::warn!("{} budget={} seed={} prompt={}: {}", row.strategy, row.budget, row.seed, row.prompt, row.error);
        }
        writer.lock().expect("row writer").push(index, row)
    })?;

    let w = writer.into_inner().expect("row writer");
    Ok(w.rows)
}

pub fn write_rows(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn rows_to_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

pub fn read_rows(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::candidate_count;

    #[test]
    fn best_of_n_budget_arithmetic() {
        let base = SearchConfig::new(Strategy::BestOfN);
        assert_eq!(derive_config(&base, 50, 0.0).unwrap().n_base, 1);
        assert_eq!(derive_config(&base, 420, 0.0).unwrap().n_base, 8);
        assert!(derive_config(&base, 49, 0.0).is_none());
    }

    #[test]
    fn derived_configs_respect_budget() {
        for strategy in [Strategy::Imagery, Strategy::Beam, Strategy::Particle] {
            let base = SearchConfig::new(strategy);
            for budget in [50, 100, 200, 400, 800, 1600] {
                for d in [0.0, 0.5, 1.2] {
                    let Some(c) = derive_config(&base, budget, d) else {
                        let floor = candidate_count(1, base.lambda, d) as u64 * base.steps as u64;
                        assert!(strategy == Strategy::Imagery && budget < floor, "{strategy:?} {budget} {d}");
                        continue;
                    };
                    c.validate().unwrap();
                    assert!(planned_nfe(&c, d).nfe <= budget, "{strategy:?} {budget} {d}");
                }
            }
        }
    }

    #[test]
    fn imagery_budget_prefers_branching() {
        let mut base = SearchConfig::new(Strategy::Imagery);
        base.imagery_schedule = vec![5, 10];
        base.size_schedule = vec![10, 5, 5];
        // 7 roll out in full (350), six are retained, and one new
        // child looks ahead from t = 39.
        let c = derive_config(&base, 400, 0.0).unwrap();
        assert_eq!(c.size_schedule, vec![7, 6, 6]);
        assert_eq!(planned_nfe(&c, 0.0).nfe, 389);
        // 100 cannot hold two roots plus a child: plain best-of-2 shape.
        assert_eq!(derive_config(&base, 100, 0.0).unwrap().size_schedule, vec![2, 2, 2]);
    }

    #[test]
    fn tiny_budget_keeps_a_single_trajectory() {
        let base = SearchConfig::new(Strategy::Imagery);
        let c = derive_config(&base, 50, 0.0).unwrap();
        assert_eq!(c.size_schedule[0], 1);
        assert_eq!(planned_nfe(&c, 0.0).nfe, 50);
        assert!(derive_config(&base, 149, 1.2).is_none());
        assert!(derive_config(&base, 150, 1.2).is_some());
    }

    #[test]
    fn csv_round_trip_is_byte_identical() {
        let rows = vec![
            SweepRow {
                strategy: "imagery".into(),
                budget: 100,
                seed: 3,
                prompt: 0,
                d_sem: 0.1 + 0.2,
                reward: Some(-1.0 / 3.0),
                mq: Some(-2.5e-7),
                ta: Some(-0.0),
                vq: Some(0.0),
                r_any: Some(0.0),
                nfe_actual: 98,
                wall_time: 0.0123,
                failed: false,
                error: String::new(),
            },
            SweepRow {
                strategy: "best, \"quoted\"".into(),
                reward: None,
                mq: None,
                ta: None,
                vq: None,
                r_any: None,
                failed: true,
                error: "budget too small".into(),
                ..failed_row("x", &Cell { search: 0, budget: 10, seed: 1, prompt: 2 }, 1e300, String::new())
            },
        ];
        let first = rows_to_csv(&rows).unwrap();
        let mut reader = csv::Reader::from_reader(first.as_bytes());
        let parsed: Vec<SweepRow> = reader.deserialize().collect::<std::result::Result<_, _>>().unwrap();
        assert_eq!(parsed, rows);
        assert_eq!(rows_to_csv(&parsed).unwrap(), first);
    }
}
