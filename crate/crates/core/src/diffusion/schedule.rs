use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// ᾱ_t = 1 − t/(T+1)
    LinearAlphaBar,
    /// ᾱ_t = cos²((t/T)·π/2·0.999)
    #[default]
    CosineAlphaBar,
}

/// Variance-preserving coefficients for t = 0..=T, with t = 0 the data end.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    kind: ScheduleKind,
    zeta: Vec<f64>,
    sigma: Vec<f64>,
}

impl NoiseSchedule {
    pub fn new(steps: usize, kind: ScheduleKind) -> Result<Self> {
        if steps < 2 {
            return Err(Error::config(format!("schedule needs T >= 2, got {steps}")));
        }
        let alpha_bar = |t: usize| -> f64 {
            if t == 0 {
                return 1.0;
            }
            match kind {
                ScheduleKind::LinearAlphaBar => 1.0 - t as f64 / (steps as f64 + 1.0),
                ScheduleKind::CosineAlphaBar => {
                    let c = (t as f64 / steps as f64 * std::f64::consts::FRAC_PI_2 * 0.999).cos();
                    c * c
                }
            }
        };
        let (zeta, sigma) = (0..=steps)
            .map(|t| {
                let a = alpha_bar(t);
                (a.sqrt(), (1.0 - a).sqrt())
            })
            .unzip();
        Ok(Self { kind, zeta, sigma })
    }

    pub fn steps(&self) -> usize {
        self.zeta.len() - 1
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn zeta(&self, t: usize) -> f64 {
        self.zeta[t]
    }

    pub fn sigma(&self, t: usize) -> f64 {
        self.sigma[t]
    }
}

pub fn make_schedule(steps: usize, kind: ScheduleKind) -> Result<NoiseSchedule> {
    NoiseSchedule::new(steps, kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_is_variance_preserving_and_decreasing() {
        let s = make_schedule(50, ScheduleKind::LinearAlphaBar).unwrap();
        assert!(s.zeta(1) > s.zeta(50));
        for t in 0..=50 {
            assert!((s.zeta(t).powi(2) + s.sigma(t).powi(2) - 1.0).abs() <= 1e-12);
            if t > 0 {
                assert!(s.zeta(t) < s.zeta(t - 1));
            }
        }
        assert_eq!((s.zeta(0), s.sigma(0)), (1.0, 0.0));
    }

    #[test]
    fn cosine_ends_near_pure_noise() {
        let s = make_schedule(50, ScheduleKind::CosineAlphaBar).unwrap();
        assert!(s.sigma(50) >= 0.99);
        assert_eq!((s.zeta(0), s.sigma(0)), (1.0, 0.0));
    }

    #[test]
    fn rejects_short_schedules() {
        assert!(matches!(make_schedule(1, ScheduleKind::CosineAlphaBar), Err(Error::InvalidConfig(_))));
    }
}
