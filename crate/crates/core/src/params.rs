//! Model coefficients and snapshot schedules.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Diffusion and cross-diffusion coefficients of the conservative two-species
/// system `∂t u = Δ((d1 + a12 v) u)`, `∂t v = Δ((d2 + a21 u) v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SktParams {
    pub d1: f64,
    pub d2: f64,
    pub a12: f64,
    pub a21: f64,
}

impl SktParams {
    pub const fn new(d1: f64, d2: f64, a12: f64, a21: f64) -> Self {
        Self { d1, d2, a12, a21 }
    }

    /// All rates zero: the walk never moves.
    pub const fn frozen() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0)
    }

    /// Affine motility of species 1 given the local density of species 2.
    #[inline]
    pub fn mu1(&self, v: f64) -> f64 {
        self.d1 + self.a12 * v
    }

    /// Affine motility of species 2 given the local density of species 1.
    #[inline]
    pub fn mu2(&self, u: f64) -> f64 {
        self.d2 + self.a21 * u
    }

    /// `d1 d2 / (a12 a21)`, infinite when either cross coefficient vanishes.
    pub fn smallness_threshold(&self) -> f64 {
        let denom = self.a12 * self.a21;
        if denom == 0.0 {
            f64::INFINITY
        } else {
            self.d1 * self.d2 / denom
        }
    }

    /// Threshold minus `sup|ū| · sup|v̄|`.
    pub fn smallness_margin(&self, sup_u: f64, sup_v: f64) -> f64 {
        self.smallness_threshold() - sup_u * sup_v
    }

    pub fn is_frozen(&self) -> bool {
        self.d1 == 0.0 && self.d2 == 0.0 && self.a12 == 0.0 && self.a21 == 0.0
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        for (name, v) in [
            ("d1", self.d1),
            ("d2", self.d2),
            ("a12", self.a12),
            ("a21", self.a21),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ParamsError::Coefficient { name, value: v });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("coefficient {name} must be finite and non-negative, got {value}")]
    Coefficient { name: &'static str, value: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("schedule needs at least {needed} snapshot times, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("schedule must start at t = 0, starts at {0}")]
    DoesNotStartAtZero(f64),
    #[error("schedule is not strictly increasing at index {index}")]
    Unsorted { index: usize },
    #[error("schedule contains a non-finite time at index {index}")]
    NonFinite { index: usize },
}

/// Checks that `times` is a finite, strictly increasing schedule starting at
/// zero with at least `needed` entries.
pub fn validate_schedule(times: &[f64], needed: usize) -> Result<(), ScheduleError> {
    if times.len() < needed {
        return Err(ScheduleError::TooShort {
            needed,
            got: times.len(),
        });
    }
    if let Some(index) = times.iter().position(|t| !t.is_finite()) {
        return Err(ScheduleError::NonFinite { index });
    }
    if let Some(&t0) = times.first() {
        if t0 != 0.0 {
            return Err(ScheduleError::DoesNotStartAtZero(t0));
        }
    }
    if let Some(index) = times.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(ScheduleError::Unsorted { index: index + 1 });
    }
    Ok(())
}

/// `count` uniformly spaced times on `[0, t_final]`, both ends included.
pub fn uniform_schedule(t_final: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2, "a schedule needs both endpoints");
    let last = count - 1;
    (0..count)
        .map(|i| {
            if i == last {
                t_final
            } else {
                t_final * i as f64 / last as f64
            }
        })
        .collect()
}
