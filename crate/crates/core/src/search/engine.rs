use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use super::record::{PoolEntry, PoolKind, PoolRecord, RunRecord, Winner};
use super::{SearchConfig, SearchContext};
use crate::diffusion::{advance, ddim_step, predict, rollout_path, DiffusionState, Trajectory};
use crate::error::{Error, Result};
use crate::rewards::RewardComponents;
use crate::rng::{mix, standard_normal, ROOT};

#[derive(Debug, Clone)]
pub(crate) struct Candidate {
    pub id: u64,
    pub parent_id: Option<u64>,
    pub root_id: u64,
    pub child_seed: u64,
    pub state: DiffusionState,
    /// Lookahead path through `state`, valid until the next stochastic step.
    /// Deterministic moves along it are free.
    pub path: Option<Arc<Trajectory>>,
    pub components: Option<RewardComponents>,
    pub reward: f64,
}

impl Candidate {
    pub fn scored(&self) -> bool {
        self.components.is_some()
    }

    pub fn x0_hat(&self) -> Option<&[f64]> {
        self.path.as_ref().map(|p| p.x0())
    }

    fn entry(&self, step: usize, nfe: u64) -> PoolEntry {
        PoolEntry {
            id: self.id,
            parent: self.parent_id,
            step,
            reward: self.reward.is_finite().then_some(self.reward),
            nfe,
            retained: false,
        }
    }
}

/// Highest reward first; ties and failures resolved by lowest id.
pub(crate) fn rank(a: &Candidate, b: &Candidate) -> std::cmp::Ordering {
    b.reward.total_cmp(&a.reward).then(a.id.cmp(&b.id))
}

pub(crate) struct Engine<'a> {
    pub cfg: &'a SearchConfig,
    pub ctx: SearchContext<'a>,
    next_id: u64,
    nfe: u64,
    pools: Vec<PoolRecord>,
    scaled_sizes: Vec<usize>,
    started: Instant,
}

impl<'a> Engine<'a> {
    pub fn new(cfg: &'a SearchConfig, ctx: SearchContext<'a>) -> Result<Self> {
        cfg.validate()?;
        if ctx.schedule.steps() != cfg.steps {
            return Err(Error::config(format!(
                "noise schedule has {} steps, config expects {}",
                ctx.schedule.steps(),
                cfg.steps
            )));
        }
        Ok(Self {
            cfg,
            ctx,
            next_id: 0,
            nfe: 0,
            pools: Vec::new(),
            scaled_sizes: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn d_sem(&self) -> f64 {
        self.ctx.distance.value
    }

    pub fn set_scaled_sizes(&mut self, sizes: Vec<usize>) {
        self.scaled_sizes = sizes;
    }

    fn fresh_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    /// `n` trajectories from independent x_T ~ N(0, I).
    pub fn initial_pool(&mut self, n: usize) -> Vec<Candidate> {
        let dim = self.ctx.model.dim();
        (0..n)
            .map(|i| {
                let id = self.fresh_id();
                let seed = mix(self.cfg.seed, 0, ROOT, i as u64);
                Candidate {
                    id,
                    parent_id: None,
                    root_id: id,
                    child_seed: seed,
                    state: DiffusionState::new(standard_normal(seed, dim), self.cfg.steps),
                    path: None,
                    components: None,
                    reward: f64::NEG_INFINITY,
                }
            })
            .collect()
    }

    /// Deterministically advance every candidate to `to_t`. Candidates with
    /// a lookahead path move along it for free. Returns calls made.
    pub fn advance_all(&mut self, pool: &mut [Candidate], to_t: usize) -> Result<u64> {
        let ctx = self.ctx;
        let results: Vec<Result<(DiffusionState, u64)>> = pool
            .par_iter()
            .map(|c| match c.path.as_ref().and_then(|p| p.x_at(to_t)) {
                Some(x) if to_t <= c.state.t => {
                    let walked = (c.state.t - to_t) as u64;
                    Ok((DiffusionState { x: x.to_vec(), t: to_t, nfe_so_far: c.state.nfe_so_far + walked }, 0))
                }
                _ => advance(&c.state, to_t, ctx.model, ctx.schedule, ctx.prompt),
            })
            .collect();
        let mut spent = 0;
        for (c, r) in pool.iter_mut().zip(results) {
            let (state, n) = r?;
            c.state = state;
            spent += n;
        }
        self.nfe += spent;
        Ok(spent)
    }

    /// Replace each parent by `counts[i]` children one step further on.
    /// The first child continues deterministically and keeps the parent's
    /// path and score; the others take an η-mixed step with noise drawn
    /// from their own split seed. Parents on a path reuse its prediction.
    pub fn branch(&mut self, parents: &[Candidate], counts: &[usize], step_index: u64) -> Result<(Vec<Candidate>, u64)> {
        let ctx = self.ctx;
        let active: Vec<&Candidate> = parents.iter().zip(counts).filter(|(_, &n)| n > 0).map(|(p, _)| p).collect();
        let eps: Vec<Result<(Vec<f64>, u64)>> = active
            .par_iter()
            .map(|p| match p.path.as_ref().and_then(|path| path.eps_at(p.state.t)) {
                Some(e) => Ok((e.to_vec(), 0)),
                None => predict(ctx.model, &p.state, ctx.prompt).map(|e| (e, 1)),
            })
            .collect();
        let eps: Vec<(Vec<f64>, u64)> = eps.into_iter().collect::<Result<_>>()?;
        let spent: u64 = eps.iter().map(|(_, n)| n).sum();
        self.nfe += spent;

        let mut children = Vec::new();
        let mut eps = eps.into_iter();
        for (parent, &n) in parents.iter().zip(counts) {
            if n == 0 {
                continue;
            }
            let (e, _) = eps.next().expect("one prediction per active parent");
            for k in 0..n {
                let seed = mix(self.cfg.seed, step_index, parent.id, k as u64);
                let mut state = if k == 0 {
                    ddim_step(&parent.state, &e, ctx.schedule, 0.0, None)?
                } else {
                    let z = standard_normal(seed, e.len());
                    ddim_step(&parent.state, &e, ctx.schedule, self.cfg.eta_branch, Some(&z))?
                };
                state.nfe_so_far = parent.state.nfe_so_far + 1;
                let inherit = k == 0 && parent.path.is_some();
                children.push(Candidate {
                    id: self.fresh_id(),
                    parent_id: Some(parent.id),
                    root_id: parent.root_id,
                    child_seed: seed,
                    state,
                    path: if inherit { parent.path.clone() } else { None },
                    components: if inherit { parent.components } else { None },
                    reward: if inherit { parent.reward } else { f64::NEG_INFINITY },
                });
            }
        }
        Ok((children, spent))
    }

    /// Roll out candidates lacking an endpoint and score unscored ones.
    /// Returns the per-candidate lookahead cost.
    pub fn evaluate(&mut self, pool: &mut [Candidate]) -> Result<Vec<u64>> {
        let ctx = self.ctx;
        let d_sem = self.d_sem();
        type Evaluated = (Option<Trajectory>, Option<Result<RewardComponents>>);
        let results: Vec<Result<Evaluated>> = pool
            .par_iter()
            .map(|c| {
                let path = match &c.path {
                    Some(_) => None,
                    None => Some(rollout_path(&c.state, ctx.model, ctx.schedule, ctx.prompt)?),
                };
                let score = if c.scored() && path.is_none() {
                    None
                } else {
                    let x = path.as_ref().map(Trajectory::x0).or(c.x0_hat()).expect("endpoint available");
                    Some(ctx.reward.score(x, ctx.prompt))
                };
                Ok((path, score))
            })
            .collect();
        let mut costs = Vec::with_capacity(pool.len());
        for (c, r) in pool.iter_mut().zip(results) {
            let (path, score) = r?;
            let nfe = path.as_ref().map_or(0, Trajectory::nfe);
            if let Some(p) = path {
                c.path = Some(Arc::new(p));
            }
            match score {
                Some(Ok(comp)) => {
                    c.reward = ctx.weights.score(&comp, d_sem);
                    c.components = Some(comp);
                }
                Some(Err(e)) => {
                    log::warn!("candidate {} demoted: {e}", c.id);
                    c.reward = f64::NEG_INFINITY;
                    c.components = Some(RewardComponents {
                        mq: f64::NAN,
                        ta: f64::NAN,
                        vq: f64::NAN,
                        r_any: f64::NAN,
                    });
                }
                None => {}
            }
            costs.push(nfe);
            self.nfe += nfe;
        }
        Ok(costs)
    }

    pub fn record_pool(
        &mut self,
        kind: PoolKind,
        step: usize,
        advance_nfe: u64,
        branch_nfe: u64,
        pool: &[Candidate],
        costs: &[u64],
        retained: &[u64],
    ) {
        let entries = pool
            .iter()
            .zip(costs)
            .map(|(c, &n)| {
                let mut e = c.entry(step, n);
                e.retained = retained.contains(&c.id);
                e
            })
            .collect();
        self.pools.push(PoolRecord { kind, step, advance_nfe, branch_nfe, entries });
    }

    pub fn all_failed(pool: &[Candidate]) -> bool {
        pool.iter().all(|c| !c.reward.is_finite())
    }

    pub fn failure(self, step: usize) -> Error {
        Error::SearchFailed { step, record: Box::new(self.into_record(None)) }
    }

    /// Keep the `k` best candidates, ordered by rank.
    pub fn retain(mut pool: Vec<Candidate>, k: usize) -> Vec<Candidate> {
        pool.sort_by(rank);
        pool.truncate(k);
        pool
    }

    /// Complete every survivor, score it, and pick the winner.
    pub fn finish(mut self, mut pool: Vec<Candidate>, advance_nfe: u64) -> Result<RunRecord> {
        let costs = self.evaluate(&mut pool)?;
        let step = self.cfg.steps;
        let best = pool.iter().min_by(|a, b| rank(a, b)).cloned();
        let best = match best {
            Some(b) if b.reward.is_finite() => b,
            _ => {
                self.record_pool(PoolKind::Final, step, advance_nfe, 0, &pool, &costs, &[]);
                return Err(self.failure(step));
            }
        };
        self.record_pool(PoolKind::Final, step, advance_nfe, 0, &pool, &costs, &[best.id]);
        let winner = Winner {
            id: best.id,
            parent: best.parent_id,
            root_id: best.root_id,
            child_seed: best.child_seed,
            x0: best.x0_hat().expect("evaluated").to_vec(),
            reward: best.reward,
            components: best.components.expect("scored"),
        };
        Ok(self.into_record(Some(winner)))
    }

    fn into_record(self, winner: Option<Winner>) -> RunRecord {
        RunRecord {
            config: self.cfg.clone(),
            config_hash: self.cfg.hash(),
            prompt: self.ctx.prompt.clone(),
            d_sem: self.ctx.distance.value,
            d_sem_degenerate: self.ctx.distance.degenerate,
            scaled_sizes: self.scaled_sizes,
            pools: self.pools,
            nfe_total: self.nfe,
            winner,
            wall_time: self.started.elapsed().as_secs_f64(),
        }
    }
}
