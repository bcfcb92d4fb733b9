use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Denoiser, NoiseSchedule};
use crate::error::{Error, Result};
use crate::semantics::PromptSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub w: f64,
    pub mu: Vec<f64>,
    pub s: f64,
}

/// Isotropic Gaussian mixture used as an analytic data distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureTarget {
    pub dim: usize,
    pub components: Vec<MixtureComponent>,
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn sq_dist(a: &[f64], b: impl Iterator<Item = f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl GaussianMixtureTarget {
    pub fn new(dim: usize, components: Vec<MixtureComponent>) -> Result<Self> {
        let t = Self { dim, components };
        t.validate()?;
        Ok(t)
    }

    pub fn single(mu: Vec<f64>, s: f64) -> Result<Self> {
        Self::new(mu.len(), vec![MixtureComponent { w: 1.0, mu, s }])
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.components.is_empty() {
            return Err(Error::config("mixture needs dim >= 1 and at least one component"));
        }
        for (k, c) in self.components.iter().enumerate() {
            if !(c.w > 0.0 && c.w.is_finite()) || !(c.s >= 0.0 && c.s.is_finite()) {
                return Err(Error::config(format!("component {k}: need w > 0 and s >= 0")));
            }
            if c.mu.len() != self.dim || c.mu.iter().any(|m| !m.is_finite()) {
                return Err(Error::config(format!("component {k}: mean must be {} finite values", self.dim)));
            }
        }
        let total: f64 = self.components.iter().map(|c| c.w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!("mixture weights sum to {total}, expected 1")));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let t: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        t.validate()?;
        Ok(t)
    }

    /// Log-density at `x`. Point-mass components use a variance floor of 1e-12.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.dim as f64;
        let terms: Vec<f64> = self
            .components
            .iter()
            .map(|c| {
                let var = (c.s * c.s).max(1e-12);
                c.w.ln()
                    - 0.5 * d * (2.0 * std::f64::consts::PI * var).ln()
                    - sq_dist(x, c.mu.iter().copied()) / (2.0 * var)
            })
            .collect();
        log_sum_exp(&terms)
    }

    /// Posterior mean E[x₀ | x_t] under x_t = ζ x₀ + σ ε.
    pub fn posterior_mean(&self, x: &[f64], zeta: f64, sigma: f64) -> Vec<f64> {
        let resp = self.responsibilities(x, zeta, sigma);
        let mut mean = vec![0.0; self.dim];
        for (c, &r) in self.components.iter().zip(&resp) {
            let var = zeta * zeta * c.s * c.s + sigma * sigma;
            for ((m, xi), mu) in mean.iter_mut().zip(x).zip(&c.mu) {
                *m += r * (zeta * c.s * c.s * xi + sigma * sigma * mu) / var;
            }
        }
        mean
    }

    /// Component responsibilities for `x` at noise level `(zeta, sigma)`.
    pub fn responsibilities(&self, x: &[f64], zeta: f64, sigma: f64) -> Vec<f64> {
        let d = self.dim as f64;
        let log_r: Vec<f64> = self
            .components
            .iter()
            .map(|c| {
                let var = zeta * zeta * c.s * c.s + sigma * sigma;
                c.w.ln() - 0.5 * d * var.ln() - sq_dist(x, c.mu.iter().map(|m| zeta * m)) / (2.0 * var)
            })
            .collect();
        let lse = log_sum_exp(&log_r);
        log_r.iter().map(|l| (l - lse).exp()).collect()
    }
}

/// Exact noise prediction for a mixture target: (x − ζ_t·E[x₀|x_t]) / σ_t.
pub fn gm_predict_noise(
    target: &GaussianMixtureTarget,
    schedule: &NoiseSchedule,
    x: &[f64],
    t: usize,
) -> Result<Vec<f64>> {
    if x.len() != target.dim {
        return Err(Error::input(format!("state dim {} != target dim {}", x.len(), target.dim)));
    }
    if t == 0 || t > schedule.steps() {
        return Err(Error::input(format!("timestep {t} outside 1..={}", schedule.steps())));
    }
    let (zeta, sigma) = (schedule.zeta(t), schedule.sigma(t));
    if sigma == 0.0 {
        return Err(Error::DivisionByZero(format!("sigma_{t} = 0")));
    }
    let mean = target.posterior_mean(x, zeta, sigma);
    Ok(x.iter().zip(&mean).map(|(xi, m)| (xi - zeta * m) / sigma).collect())
}

/// Denoiser backed by [`gm_predict_noise`]. Ignores the prompt condition.
#[derive(Debug, Clone)]
pub struct MixtureDenoiser {
    pub target: GaussianMixtureTarget,
    pub schedule: NoiseSchedule,
}

impl MixtureDenoiser {
    pub fn new(target: GaussianMixtureTarget, schedule: NoiseSchedule) -> Self {
        Self { target, schedule }
    }
}

impl Denoiser for MixtureDenoiser {
    fn dim(&self) -> usize {
        self.target.dim
    }

    fn predict_noise(&self, x: &[f64], t: usize, _condition: &PromptSpec) -> Result<Vec<f64>> {
        gm_predict_noise(&self.target, &self.schedule, x, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::ScheduleKind;

    fn sched() -> NoiseSchedule {
        NoiseSchedule::new(50, ScheduleKind::LinearAlphaBar).unwrap()
    }

    #[test]
    fn delta_component_gives_exact_mean() {
        let target = GaussianMixtureTarget::single(vec![2.0, 0.0], 0.0).unwrap();
        let s = sched();
        let x = [0.3, -1.2];
        let t = 17;
        let eps = gm_predict_noise(&target, &s, &x, t).unwrap();
        let expect = [(0.3 - s.zeta(t) * 2.0) / s.sigma(t), (-1.2 - 0.0) / s.sigma(t)];
        for (a, b) in eps.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_mixture_at_origin() {
        let target = GaussianMixtureTarget::new(
            2,
            vec![
                MixtureComponent { w: 0.5, mu: vec![1.0, 0.0], s: 0.3 },
                MixtureComponent { w: 0.5, mu: vec![-1.0, 0.0], s: 0.3 },
            ],
        )
        .unwrap();
        let s = sched();
        let r = target.responsibilities(&[0.0, 0.0], s.zeta(10), s.sigma(10));
        assert!((r[0] - 0.5).abs() < 1e-15 && (r[1] - 0.5).abs() < 1e-15);
        let m = target.posterior_mean(&[0.0, 0.0], s.zeta(10), s.sigma(10));
        assert!(m[0].abs() < 1e-15);
    }

    #[test]
    fn distant_components_do_not_underflow() {
        let target = GaussianMixtureTarget::new(
            1,
            vec![
                MixtureComponent { w: 0.5, mu: vec![-400.0], s: 0.01 },
                MixtureComponent { w: 0.5, mu: vec![400.0], s: 0.01 },
            ],
        )
        .unwrap();
        let s = NoiseSchedule::new(1000, ScheduleKind::LinearAlphaBar).unwrap();
        let eps = gm_predict_noise(&target, &s, &[399.0], 1).unwrap();
        assert!(eps[0].is_finite());
    }

    #[test]
    fn rejects_bad_targets_and_queries() {
        assert!(GaussianMixtureTarget::new(1, vec![MixtureComponent { w: 0.7, mu: vec![0.0], s: 1.0 }]).is_err());
        assert!(GaussianMixtureTarget::new(2, vec![MixtureComponent { w: 1.0, mu: vec![0.0], s: 1.0 }]).is_err());
        let target = GaussianMixtureTarget::single(vec![0.0], 1.0).unwrap();
        assert!(gm_predict_noise(&target, &sched(), &[0.0], 0).is_err());
        assert!(gm_predict_noise(&target, &sched(), &[0.0, 1.0], 3).is_err());
    }

    #[test]
    fn target_file_schema() {
        let json = r#"{"dim": 2, "components": [{"w": 0.25, "mu": [3, 3], "s": 0.4}, {"w": 0.75, "mu": [-3, 3], "s": 0.4}]}"#;
        let t: GaussianMixtureTarget = serde_json::from_str(json).unwrap();
        t.validate().unwrap();
        assert_eq!(t.components[1].mu, vec![-3.0, 3.0]);
    }
}
