//! DDIM sampling over a pluggable denoiser.
//!
//! Timesteps run t = T (noise) down to t = 0 (data). The forward process is
//! x_t = ζ_t·x₀ + σ_t·ε with ζ_t² + σ_t² = 1.

mod mixture;
mod schedule;

pub use mixture::{gm_predict_noise, GaussianMixtureTarget, MixtureComponent, MixtureDenoiser};
pub use schedule::{make_schedule, NoiseSchedule, ScheduleKind};

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::semantics::PromptSpec;

/// Noise-prediction network f(x_t, t, c).
pub trait Denoiser: Send + Sync {
    fn dim(&self) -> usize;
    fn predict_noise(&self, x: &[f64], t: usize, condition: &PromptSpec) -> Result<Vec<f64>>;
}

impl<D: Denoiser + ?Sized> Denoiser for &D {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn predict_noise(&self, x: &[f64], t: usize, condition: &PromptSpec) -> Result<Vec<f64>> {
        (**self).predict_noise(x, t, condition)
    }
}

/// Wraps a denoiser and counts every call. Safe to share across threads.
#[derive(Debug)]
pub struct CountingDenoiser<D> {
    inner: D,
    calls: AtomicU64,
}

impl<D> CountingDenoiser<D> {
    pub fn new(inner: D) -> Self {
        Self { inner, calls: AtomicU64::new(0) }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::SeqCst);
    }
}

impl<D: Denoiser> Denoiser for CountingDenoiser<D> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn predict_noise(&self, x: &[f64], t: usize, condition: &PromptSpec) -> Result<Vec<f64>> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.predict_noise(x, t, condition)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionState {
    pub x: Vec<f64>,
    pub t: usize,
    pub nfe_so_far: u64,
}

impl DiffusionState {
    pub fn new(x: Vec<f64>, t: usize) -> Self {
        Self { x, t, nfe_so_far: 0 }
    }
}

/// Calls the model at `state` and validates the output shape.
pub fn predict(model: &dyn Denoiser, state: &DiffusionState, condition: &PromptSpec) -> Result<Vec<f64>> {
    let eps = model.predict_noise(&state.x, state.t, condition).map_err(|e| match e {
        Error::Model { .. } => e,
        other => Error::Model { t: state.t, message: other.to_string() },
    })?;
    if eps.len() != state.x.len() {
        return Err(Error::Model {
            t: state.t,
            message: format!("prediction dim {} != state dim {}", eps.len(), state.x.len()),
        });
    }
    Ok(eps)
}

/// One DDIM update from t to t−1.
///
/// x̂₀ = (x_t − σ_t·eps)/ζ_t and x_{t−1} = ζ_{t−1}·x̂₀ + σ_{t−1}·dir, where
/// dir = eps for η = 0 and √(1−η²)·eps + η·z otherwise.
pub fn ddim_step(
    state: &DiffusionState,
    eps: &[f64],
    schedule: &NoiseSchedule,
    eta: f64,
    branch_noise: Option<&[f64]>,
) -> Result<DiffusionState> {
    let t = state.t;
    if t == 0 || t > schedule.steps() {
        return Err(Error::input(format!("cannot step from t={t}")));
    }
    if eps.len() != state.x.len() || eps.iter().any(|e| !e.is_finite()) {
        return Err(Error::input("noise prediction must be finite and match the state dim"));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::input(format!("eta {eta} outside [0, 1]")));
    }
    let (zt, st) = (schedule.zeta(t), schedule.sigma(t));
    let (zp, sp) = (schedule.zeta(t - 1), schedule.sigma(t - 1));
    let x = if eta == 0.0 {
        state
            .x
            .iter()
            .zip(eps)
            .map(|(x, e)| zp * ((x - st * e) / zt) + sp * e)
            .collect()
    } else {
        let z = branch_noise.ok_or_else(|| Error::input("eta > 0 requires branch noise"))?;
        if z.len() != eps.len() {
            return Err(Error::input("branch noise dim mismatch"));
        }
        let keep = (1.0 - eta * eta).sqrt();
        state
            .x
            .iter()
            .zip(eps)
            .zip(z)
            .map(|((x, e), z)| zp * ((x - st * e) / zt) + sp * (keep * e + eta * z))
            .collect()
    };
    Ok(DiffusionState { x, t: t - 1, nfe_so_far: state.nfe_so_far })
}

/// Deterministic denoising from `state` down to `to_t`. Returns the new state
/// and the number of model calls made.
pub fn advance(
    state: &DiffusionState,
    to_t: usize,
    model: &dyn Denoiser,
    schedule: &NoiseSchedule,
    condition: &PromptSpec,
) -> Result<(DiffusionState, u64)> {
    if to_t > state.t {
        return Err(Error::input(format!("cannot advance from t={} to t={to_t}", state.t)));
    }
    let mut cur = state.clone();
    let mut nfe = 0;
    while cur.t > to_t {
        let eps = predict(model, &cur, condition)?;
        nfe += 1;
        cur = ddim_step(&cur, &eps, schedule, 0.0, None)?;
        cur.nfe_so_far += 1;
    }
    Ok((cur, nfe))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub x0: Vec<f64>,
    pub nfe: u64,
}

/// Lookahead: complete the trajectory deterministically (η = 0) and return x̂₀.
/// Uses exactly `state.t` model calls; a state already at t = 0 is returned as is.
pub fn rollout_to_x0(
    state: &DiffusionState,
    model: &dyn Denoiser,
    schedule: &NoiseSchedule,
    condition: &PromptSpec,
) -> Result<Rollout> {
    let (end, nfe) = advance(state, 0, model, schedule, condition)?;
    Ok(Rollout { x0: end.x, nfe })
}

/// A deterministic path from `start_t` down to t = 0 with the prediction
/// made at each step, so later steps along it need no model calls.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    start_t: usize,
    /// `xs[i]` is the state at t = start_t − i; the last entry is x̂₀.
    xs: Vec<Vec<f64>>,
    /// `eps[i]` is the prediction made at t = start_t − i.
    eps: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn start_t(&self) -> usize {
        self.start_t
    }

    pub fn x0(&self) -> &[f64] {
        self.xs.last().expect("trajectory holds at least its start")
    }

    pub fn x_at(&self, t: usize) -> Option<&[f64]> {
        self.start_t.checked_sub(t).and_then(|i| self.xs.get(i)).map(Vec::as_slice)
    }

    pub fn eps_at(&self, t: usize) -> Option<&[f64]> {
        self.start_t.checked_sub(t).and_then(|i| self.eps.get(i)).map(Vec::as_slice)
    }

    /// Model calls spent producing this path.
    pub fn nfe(&self) -> u64 {
        self.eps.len() as u64
    }
}

/// Lookahead that keeps every intermediate state and prediction.
/// Its endpoint is identical to [`rollout_to_x0`] from the same state.
pub fn rollout_path(
    state: &DiffusionState,
    model: &dyn Denoiser,
    schedule: &NoiseSchedule,
    condition: &PromptSpec,
) -> Result<Trajectory> {
    let mut xs = vec![state.x.clone()];
    let mut eps_all = Vec::with_capacity(state.t);
    let mut cur = state.clone();
    while cur.t > 0 {
        let eps = predict(model, &cur, condition)?;
        cur = ddim_step(&cur, &eps, schedule, 0.0, None)?;
        xs.push(cur.x.clone());
        eps_all.push(eps);
    }
    Ok(Trajectory { start_t: state.t, xs, eps: eps_all })
}
