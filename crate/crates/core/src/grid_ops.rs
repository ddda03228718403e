//! The periodic lattice Laplacian on the discrete torus and the rescaled
//! vector norms built on it.
//!
//! Sites are stored 0-based: slot `i` holds the value at node `x_{i+1} = (i+1)/M`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::numeric::{compensated_sum, CompensatedSum};

/// Values on the `M` sites of the discrete torus.
pub type GridVector = Vec<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("the periodic Laplacian needs at least 3 sites, got {0}")]
    TooFewSites(usize),
    #[error("expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("right-hand side has mean {mean:e} (scale {scale:e}); it is not in the range of the Laplacian")]
    NonZeroMean { mean: f64, scale: f64 },
}

/// `Δ_M` with periodic neighbours, `(Δu)_i = M²(u_{i+1} + u_{i-1} - 2u_i)`.
///
/// The eigenvalues of `-Δ_M` and the FFT plans are computed once; the value is
/// immutable afterwards and cheap to clone.
#[derive(Clone)]
pub struct PeriodicLaplacian {
    m: usize,
    eigenvalues: Arc<[f64]>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for PeriodicLaplacian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicLaplacian").field("m", &self.m).finish()
    }
}

/// `4M² sin²(πk/M)`, the `k`-th eigenvalue of `-Δ_M`.
#[inline]
pub fn laplacian_eigenvalue(m: usize, k: usize) -> f64 {
    let mf = m as f64;
    let s = (PI * k as f64 / mf).sin();
    4.0 * mf * mf * s * s
}

impl PeriodicLaplacian {
    pub fn new(m: usize) -> Result<Self, GridError> {
        if m < 3 {
            return Err(GridError::TooFewSites(m));
        }
        let eigenvalues: Arc<[f64]> = (0..m).map(|k| laplacian_eigenvalue(m, k)).collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            m,
            eigenvalues,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        })
    }

    pub fn sites(&self) -> usize {
        self.m
    }

    fn check(&self, u: &[f64]) -> Result<(), GridError> {
        if u.len() != self.m {
            return Err(GridError::DimensionMismatch {
                expected: self.m,
                got: u.len(),
            });
        }
        Ok(())
    }

    /// Applies `Δ_M` into `out` without allocating.
    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) -> Result<(), GridError> {
        self.check(u)?;
        self.check(out)?;
        let m = self.m;
        let m2 = (m * m) as f64;
        for i in 0..m {
            let left = u[(i + m - 1) % m];
            let right = u[(i + 1) % m];
            out[i] = m2 * ((left - u[i]) + (right - u[i]));
        }
        Ok(())
    }

    pub fn apply(&self, u: &[f64]) -> Result<GridVector, GridError> {
        let mut out = vec![0.0; self.m];
        self.apply_into(u, &mut out)?;
        Ok(out)
    }

    /// Pairs `(k, λ_k)` with `λ_k = 4M² sin²(πk/M)`, the spectrum of `-Δ_M`.
    pub fn eigen_system(&self) -> Vec<(usize, f64)> {
        self.eigenvalues.iter().copied().enumerate().collect()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Smallest nonzero eigenvalue of `-Δ_M`.
    pub fn spectral_gap(&self) -> f64 {
        self.eigenvalues[1]
    }

    /// Best constant `C` in `‖Φ - [Φ]‖_{2,M} ≤ C ‖Δ_M Φ‖_{2,M}`.
    pub fn poincare_constant(&self) -> f64 {
        1.0 / self.spectral_gap()
    }

    /// Unnormalized DFT `û_k = Σ_j u_j e^{-2πijk/M}`.
    pub fn forward(&self, u: &[f64]) -> Result<Vec<Complex64>, GridError> {
        self.check(u)?;
        let mut buf: Vec<Complex64> = u.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward.process(&mut buf);
        Ok(buf)
    }

    fn inverse_real(&self, mut coeffs: Vec<Complex64>) -> GridVector {
        self.inverse.process(&mut coeffs);
        let scale = 1.0 / self.m as f64;
        coeffs.iter().map(|c| c.re * scale).collect()
    }

    /// Returns the mean-zero `Φ` with `Δ_M Φ = w`.
    ///
    /// `w` must already be mean-zero; no projection is performed.
    pub fn solve_poisson(&self, w: &[f64]) -> Result<GridVector, GridError> {
        self.check(w)?;
        let mean = mean_of(w);
        let scale = lp_norm(w, 2.0);
        if mean.abs() > 1e-12 * scale {
            return Err(GridError::NonZeroMean { mean, scale });
        }
        let mut coeffs = self.forward(w)?;
        coeffs[0] = Complex64::new(0.0, 0.0);
        for (c, &lam) in coeffs.iter_mut().zip(self.eigenvalues.iter()).skip(1) {
            *c /= -lam;
        }
        let mut phi = self.inverse_real(coeffs);
        let drift = mean_of(&phi);
        phi.iter_mut().for_each(|x| *x -= drift);
        Ok(phi)
    }

    /// `-(ũ | Δ_M⁻¹ ũ)_M`, the squared homogeneous part of `‖u‖₋₁,M`.
    pub fn neg_sobolev_seminorm_sq(&self, u: &[f64]) -> Result<f64, GridError> {
        let coeffs = self.forward(u)?;
        let m2 = (self.m * self.m) as f64;
        let s = compensated_sum(
            coeffs.iter()
                .zip(self.eigenvalues.iter())
                .skip(1)
                .map(|(c, &lam)| c.norm_sqr() / lam),
        );
        Ok(s / m2)
    }

    /// `‖u‖₋₁,M² = -(ũ | Δ_M⁻¹ ũ)_M + [u]_M²`.
    pub fn neg_sobolev_norm_sq(&self, u: &[f64]) -> Result<f64, GridError> {
        let mean = mean_of(u);
        Ok(self.neg_sobolev_seminorm_sq(u)? + mean * mean)
    }

    pub fn neg_sobolev_norm(&self, u: &[f64]) -> Result<f64, GridError> {
        Ok(self.neg_sobolev_norm_sq(u)?.sqrt())
    }

    /// `-(u | Δ_M u)_M`, the discrete Dirichlet energy.
    pub fn dirichlet_energy(&self, u: &[f64]) -> Result<f64, GridError> {
        self.check(u)?;
        let m = self.m;
        let mf = m as f64;
        Ok(mf * compensated_sum((0..m).map(|i| {
            let d = u[(i + 1) % m] - u[i];
            d * d
        })))
    }

    /// `B_M u` with `(B_M u)_i = (2/3)u_i + (1/6)(u_{i-1} + u_{i+1})`.
    pub fn apply_mass_matrix(&self, u: &[f64]) -> Result<GridVector, GridError> {
        self.check(u)?;
        let m = self.m;
        Ok((0..m)
            .map(|i| (2.0 / 3.0) * u[i] + (u[(i + m - 1) % m] + u[(i + 1) % m]) / 6.0)
            .collect())
    }

    /// Eigenvalues `2/3 + cos(2πk/M)/3` of `B_M`.
    pub fn mass_matrix_eigenvalues(&self) -> Vec<f64> {
        let mf = self.m as f64;
        (0..self.m)
            .map(|k| 2.0 / 3.0 + (2.0 * PI * k as f64 / mf).cos() / 3.0)
            .collect()
    }
}

/// Arithmetic mean `[u]_M`.
pub fn mean_of(u: &[f64]) -> f64 {
    if u.is_empty() {
        return 0.0;
    }
    compensated_sum(u.iter().copied()) / u.len() as f64
}

/// `ũ = u - [u]_M 𝟙`.
pub fn tilde(u: &[f64]) -> GridVector {
    let mean = mean_of(u);
    u.iter().map(|x| x - mean).collect()
}

/// Rescaled norm `((1/M) Σ|u_i|^p)^{1/p}`; `p = ∞` gives the max norm.
pub fn lp_norm(u: &[f64], p: f64) -> f64 {
    assert!(p >= 1.0, "lp_norm needs p >= 1, got {p}");
    if u.is_empty() {
        return 0.0;
    }
    if p.is_infinite() {
        return u.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    }
    let n = u.len() as f64;
    if p == 1.0 {
        compensated_sum(u.iter().map(|x| x.abs())) / n
    } else if p == 2.0 {
        (compensated_sum(u.iter().map(|x| x * x)) / n).sqrt()
    } else {
        (compensated_sum(u.iter().map(|x| x.abs().powf(p))) / n).powf(1.0 / p)
    }
}

/// `‖u‖²_{2,M}`.
pub fn l2_norm_sq(u: &[f64]) -> f64 {
    if u.is_empty() {
        return 0.0;
    }
    compensated_sum(u.iter().map(|x| x * x)) / u.len() as f64
}

/// Rescaled inner product `(u | v)_M = (1/M) Σ u_i v_i`.
pub fn inner(u: &[f64], v: &[f64]) -> f64 {
    assert_eq!(u.len(), v.len(), "inner product of vectors with different lengths");
    if u.is_empty() {
        return 0.0;
    }
    let mut acc = CompensatedSum::new();
    for (a, b) in u.iter().zip(v) {
        acc.add(a * b);
    }
    acc.value() / u.len() as f64
}

/// Nodes `x_k = k/M`, `k = 1..=M`.
pub fn nodes(m: usize) -> Vec<f64> {
    (1..=m).map(|k| k as f64 / m as f64).collect()
}
