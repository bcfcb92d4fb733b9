use rand::Rng;

use super::engine::{Candidate, Engine};
use super::record::{PoolKind, RunRecord};
use super::resample::{softmax_weights, systematic_resample};
use super::{candidate_count, SearchConfig, SearchContext, Strategy};
use crate::diffusion::{ddim_step, predict, DiffusionState};
use crate::error::Result;
use crate::rewards::RewardComponents;
use crate::rng::{mix, rng_for, standard_normal, ROOT};

const RESAMPLE_STREAM: u64 = 0x5e5a_4d91;

/// Split `target` children as evenly as possible over `parents`, earlier
/// parents taking the remainder.
fn spread(target: usize, parents: usize) -> Vec<usize> {
    (0..parents)
        .map(|j| target / parents + usize::from(j < target % parents))
        .collect()
}

fn ids(pool: &[Candidate]) -> Vec<u64> {
    pool.iter().map(|c| c.id).collect()
}

/// Distance-scaled pools with branching, lookahead scoring, and pruning at
/// each imagery step.
///
/// Every size-schedule entry is scaled by (1 + λ·d_sem) with a ceiling. The
/// first is the pool width: at each imagery step survivors branch until the
/// pool holds at least that many children, and the following entry gives the
/// number retained.
pub fn imagery_search(config: &SearchConfig, ctx: SearchContext<'_>) -> Result<RunRecord> {
    let mut eng = Engine::new(config, ctx)?;
    let d = eng.d_sem();
    let sizes: Vec<usize> = config
        .size_schedule
        .iter()
        .map(|&n| candidate_count(n, config.lambda, d))
        .collect();
    eng.set_scaled_sizes(sizes.clone());
    let width = sizes[0];
    let mut pool = eng.initial_pool(width);
    for (i, &step) in config.imagery_schedule.iter().enumerate() {
        let advanced = eng.advance_all(&mut pool, config.steps - step)?;
        let counts = spread(width.max(pool.len()), pool.len());
        let (mut children, branch_nfe) = eng.branch(&pool, &counts, i as u64 + 1)?;
        let costs = eng.evaluate(&mut children)?;
        if Engine::all_failed(&children) {
            eng.record_pool(PoolKind::Branch, step, advanced, branch_nfe, &children, &costs, &[]);
            return Err(eng.failure(step));
        }
        let kept = Engine::retain(children.clone(), sizes[i + 1]);
        eng.record_pool(PoolKind::Branch, step, advanced, branch_nfe, &children, &costs, &ids(&kept));
        pool = kept;
    }
    eng.finish(pool, 0)
}

/// `n` independent deterministic trajectories; the best final sample wins.
pub fn best_of_n(n: usize, config: &SearchConfig, ctx: SearchContext<'_>) -> Result<RunRecord> {
    let mut eng = Engine::new(config, ctx)?;
    let pool = eng.initial_pool(n.max(1));
    eng.finish(pool, 0)
}

/// Fixed-width beam: every member branches into `branch_factor` children at
/// each expand step and the best `beam_width` children survive.
pub fn beam_search(
    beam_width: usize,
    branch_factor: usize,
    expand_steps: &[usize],
    config: &SearchConfig,
    ctx: SearchContext<'_>,
) -> Result<RunRecord> {
    let mut cfg = config.clone();
    cfg.imagery_schedule = expand_steps.to_vec();
    cfg.branch_factor = branch_factor;
    cfg.n_base = beam_width;
    cfg.strategy = Strategy::Beam;
    let mut eng = Engine::new(&cfg, ctx)?;
    let mut pool = eng.initial_pool(beam_width);
    for (i, &step) in expand_steps.iter().enumerate() {
        let advanced = eng.advance_all(&mut pool, cfg.steps - step)?;
        let counts = vec![branch_factor; pool.len()];
        let (mut children, branch_nfe) = eng.branch(&pool, &counts, i as u64 + 1)?;
        let costs = eng.evaluate(&mut children)?;
        if Engine::all_failed(&children) {
            eng.record_pool(PoolKind::Branch, step, advanced, branch_nfe, &children, &costs, &[]);
            return Err(eng.failure(step));
        }
        let kept = Engine::retain(children.clone(), beam_width);
        eng.record_pool(PoolKind::Branch, step, advanced, branch_nfe, &children, &costs, &ids(&kept));
        pool = kept;
    }
    eng.finish(pool, 0)
}

/// Importance resampling of a particle population at the given steps.
///
/// Particles are weighted by softmax(reward / temperature) of their lookahead
/// endpoint and resampled systematically. Duplicates are decorrelated by
/// η-mixed steps; the first copy of each particle continues deterministically.
pub fn particle_sampling(
    n_particles: usize,
    resample_steps: &[usize],
    config: &SearchConfig,
    ctx: SearchContext<'_>,
) -> Result<RunRecord> {
    let mut cfg = config.clone();
    cfg.imagery_schedule = resample_steps.to_vec();
    cfg.n_base = n_particles;
    cfg.strategy = Strategy::Particle;
    let mut eng = Engine::new(&cfg, ctx)?;
    let mut pool = eng.initial_pool(n_particles);
    for (i, &step) in resample_steps.iter().enumerate() {
        let advanced = eng.advance_all(&mut pool, cfg.steps - step)?;
        let costs = eng.evaluate(&mut pool)?;
        let rewards: Vec<f64> = pool.iter().map(|c| c.reward).collect();
        let Some(weights) = softmax_weights(&rewards, cfg.temperature) else {
            eng.record_pool(PoolKind::Resample, step, advanced, 0, &pool, &costs, &[]);
            return Err(eng.failure(step));
        };
        let offset: f64 = rng_for(mix(cfg.seed, i as u64 + 1, ROOT, RESAMPLE_STREAM)).random();
        let counts = systematic_resample(&weights, n_particles, offset);
        let (children, branch_nfe) = eng.branch(&pool, &counts, i as u64 + 1)?;
        let survivors: Vec<u64> = pool.iter().zip(&counts).filter(|(_, &n)| n > 0).map(|(c, _)| c.id).collect();
        eng.record_pool(PoolKind::Resample, step, advanced, branch_nfe, &pool, &costs, &survivors);
        pool = children;
    }
    eng.finish(pool, 0)
}

pub fn run_search(config: &SearchConfig, ctx: SearchContext<'_>) -> Result<RunRecord> {
    match config.strategy {
        Strategy::Imagery => imagery_search(config, ctx),
        Strategy::BestOfN => best_of_n(config.n_base, config, ctx),
        Strategy::Particle => particle_sampling(config.n_base, &config.imagery_schedule, config, ctx),
        Strategy::Beam => beam_search(config.n_base, config.branch_factor, &config.imagery_schedule, config, ctx),
    }
}

/// Result of one vanilla deterministic DDIM run.
#[derive(Debug, Clone, PartialEq)]
pub struct PlainSample {
    pub x0: Vec<f64>,
    pub components: RewardComponents,
    pub reward: f64,
    pub nfe: u64,
}

/// Vanilla sampling from the first split seed of `config.seed`, written as a
/// direct DDIM loop without the search engine.
pub fn plain_sample(config: &SearchConfig, ctx: SearchContext<'_>) -> Result<PlainSample> {
    let seed = mix(config.seed, 0, ROOT, 0);
    let mut state = DiffusionState::new(standard_normal(seed, ctx.model.dim()), config.steps);
    let mut nfe = 0;
    while state.t > 0 {
        let eps = predict(ctx.model, &state, ctx.prompt)?;
        nfe += 1;
        state = ddim_step(&state, &eps, ctx.schedule, 0.0, None)?;
    }
    let components = ctx.reward.score(&state.x, ctx.prompt)?;
    let reward = ctx.weights.score(&components, ctx.distance.value);
    Ok(PlainSample { x0: state.x, components, reward, nfe })
}
