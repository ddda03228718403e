//! Step and piecewise-linear reconstructions of grid vectors, fine-grid
//! resampling, Fourier Sobolev norms and the space-time trip norms.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::grid_ops::{lp_norm, l2_norm_sq, mean_of, GridError, GridVector, PeriodicLaplacian};
use crate::numeric::{compensated_sum, trapezoid};
use crate::params::{validate_schedule, ScheduleError};

/// Default fine resolution used for continuous norms.
pub const DEFAULT_M_REF: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconstructError {
    #[error("only p = 1 and p = 2 have closed forms for piecewise-linear functions, got p = {0}")]
    UnsupportedExponent(f64),
    #[error("coarse resolution {coarse} does not divide fine resolution {fine}")]
    NotDivisible { coarse: usize, fine: usize },
    #[error("homogeneous norm with s < 0 of a function with mean {0:e}; remove the mean explicitly")]
    NonZeroMean(f64),
    #[error("{snapshots} snapshots for {times} times")]
    SnapshotCount { snapshots: usize, times: usize },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Wraps `x` into `[0, 1)`.
#[inline]
fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(1.0);
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

/// `σ_M(u)`: value `u_k` on the cell `(x_{k-1}, x_k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    pub values: GridVector,
}

impl StepFunction {
    pub fn new(values: GridVector) -> Self {
        Self { values }
    }

    pub fn resolution(&self) -> usize {
        self.values.len()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let m = self.values.len();
        let k = (wrap(x) * m as f64).ceil() as usize;
        // k = 0 is the point 0 ≡ 1, which belongs to the last cell.
        let slot = if k == 0 { m - 1 } else { (k - 1).min(m - 1) };
        self.values[slot]
    }

    /// `‖σ_M(u)‖_{L^p(𝕋)}`, identical to the rescaled grid norm.
    pub fn lp_norm(&self, p: f64) -> f64 {
        lp_norm(&self.values, p)
    }
}

/// `π_M(u)`: continuous, periodic, affine between nodes, `u_k` at `x_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    pub values: GridVector,
}

impl PiecewiseLinear {
    pub fn new(values: GridVector) -> Self {
        Self { values }
    }

    pub fn resolution(&self) -> usize {
        self.values.len()
    }

    /// Value at node `x_k`, `k` taken modulo `M` (so `k = 0` is `x_M`).
    #[inline]
    pub fn node(&self, k: usize) -> f64 {
        let m = self.values.len();
        self.values[(k + m - 1) % m]
    }

    pub fn eval(&self, x: f64) -> f64 {
        let m = self.values.len();
        let s = wrap(x) * m as f64;
        let nearest = s.round();
        if (s - nearest).abs() <= 8.0 * f64::EPSILON * nearest.max(1.0) {
            return self.node(nearest as usize % m);
        }
        let k = s.floor();
        let theta = s - k;
        let k = k as usize;
        (1.0 - theta) * self.node(k) + theta * self.node(k + 1)
    }

    /// Exact `L^p(𝕋)` norm for `p ∈ {1, 2}`.
    pub fn lp_norm(&self, p: f64) -> Result<f64, ReconstructError> {
        let m = self.values.len();
        if m == 0 {
            return Ok(0.0);
        }
        let h = 1.0 / m as f64;
        let segments = (0..m).map(|i| (self.values[i], self.values[(i + 1) % m]));
        if p == 2.0 {
            let s = compensated_sum(segments.map(|(a, b)| a * a + a * b + b * b));
            Ok((h * s / 3.0).max(0.0).sqrt())
        } else if p == 1.0 {
            let s = compensated_sum(segments.map(|(a, b)| {
                if a * b >= 0.0 {
                    0.5 * (a.abs() + b.abs())
                } else {
                    0.5 * (a * a + b * b) / (a.abs() + b.abs())
                }
            }));
            Ok(h * s)
        } else {
            Err(ReconstructError::UnsupportedExponent(p))
        }
    }

    /// `‖∂ₓ π_M(u)‖²_{L²} = M Σ (u_{i+1} - u_i)²`.
    pub fn derivative_l2_sq(&self) -> f64 {
        let m = self.values.len();
        m as f64 * compensated_sum((0..m).map(|i| (self.values[(i + 1) % m] - self.values[i]).powi(2)))
    }
}

/// `ι_M f`: values of `f` at the nodes `x_k = k/M`, `k = 1..=M`.
pub fn interpolate_nodal<F: Fn(f64) -> f64>(f: F, m: usize) -> GridVector {
    (1..=m).map(|k| f(k as f64 / m as f64)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleMode {
    Step,
    Linear,
}

/// Uniform samples `f(y_j)`, `y_j = (j+1)/M_ref`, standing in for a function on 𝕋.
#[derive(Debug, Clone, PartialEq)]
pub struct FineGridFunction {
    pub samples: Vec<f64>,
}

/// How a homogeneous norm treats the zero mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanPolicy {
    /// Refuse inputs whose mean is not zero to within `1e-10`.
    Require,
    /// Drop the mean before evaluating.
    Remove,
}

impl FineGridFunction {
    pub fn from_fn<F: Fn(f64) -> f64>(f: F, m_ref: usize) -> Self {
        Self {
            samples: interpolate_nodal(f, m_ref),
        }
    }

    pub fn resolution(&self) -> usize {
        self.samples.len()
    }

    pub fn l2_norm(&self) -> f64 {
        lp_norm(&self.samples, 2.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.samples.len(), other.samples.len());
        Self {
            samples: self.samples.iter().zip(&other.samples).map(|(a, b)| a - b).collect(),
        }
    }

    /// Normalized Fourier coefficients `c_k = (1/M_ref) Σ f_j e^{-2πik y_j}` up
    /// to a unimodular phase, with the integer frequency of each slot.
    fn spectrum(&self) -> Vec<(i64, Complex64)> {
        let n = self.samples.len();
        let mut buf: Vec<Complex64> = self.samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let scale = 1.0 / n as f64;
        buf.into_iter()
            .enumerate()
            .map(|(i, c)| {
                let k = if i <= n / 2 { i as i64 } else { i as i64 - n as i64 };
                (k, c * scale)
            })
            .collect()
    }

    /// `(Σ w(k)|c_k|²)^{1/2}` with `w(k) = (1+k²)^s`, or `|k|^{2s}` over
    /// `k ≠ 0` when `homogeneous` is set.
    pub fn sobolev_norm(
        &self,
        s: f64,
        homogeneous: bool,
        policy: MeanPolicy,
    ) -> Result<f64, ReconstructError> {
        if homogeneous && s < 0.0 && policy == MeanPolicy::Require {
            let mean = mean_of(&self.samples);
            let tol = 1e-10 * (1.0 + self.l2_norm());
            if mean.abs() > tol {
                return Err(ReconstructError::NonZeroMean(mean));
            }
        }
        let total = compensated_sum(self.spectrum().into_iter().filter_map(|(k, c)| {
            let kf = k as f64;
            if homogeneous {
                (k != 0).then(|| kf.abs().powf(2.0 * s) * c.norm_sqr())
            } else {
                Some((1.0 + kf * kf).powf(s) * c.norm_sqr())
            }
        }));
        Ok(total.max(0.0).sqrt())
    }
}

/// Samples `σ_M(u)` or `π_M(u)` on the fine grid of size `m_ref`.
pub fn resample(u: &[f64], m_ref: usize, mode: ResampleMode) -> Result<FineGridFunction, ReconstructError> {
    let m = u.len();
    if m == 0 || m_ref % m != 0 {
        return Err(ReconstructError::NotDivisible { coarse: m, fine: m_ref });
    }
    let r = m_ref / m;
    let samples = match mode {
        ResampleMode::Step => (0..m_ref).map(|j| u[j / r]).collect(),
        ResampleMode::Linear => {
            let pl = PiecewiseLinear::new(u.to_vec());
            (0..m_ref)
                .map(|j| {
                    let q = (j + 1) / r;
                    let rem = (j + 1) % r;
                    if rem == 0 {
                        pl.node(q)
                    } else {
                        let theta = rem as f64 / r as f64;
                        (1.0 - theta) * pl.node(q) + theta * pl.node(q + 1)
                    }
                })
                .collect()
        }
    };
    Ok(FineGridFunction { samples })
}

/// Components of a squared trip norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripNorm {
    /// Largest snapshot value of the squared negative norm.
    pub sup_part: f64,
    /// Trapezoidal time integral of the squared `L²` norm.
    pub integral_part: f64,
}

impl TripNorm {
    pub fn squared(&self) -> f64 {
        self.sup_part + self.integral_part
    }

    pub fn value(&self) -> f64 {
        self.squared().sqrt()
    }
}

fn check_path(times: &[f64], count: usize) -> Result<(), ReconstructError> {
    validate_schedule(times, 2)?;
    if count != times.len() {
        return Err(ReconstructError::SnapshotCount {
            snapshots: count,
            times: times.len(),
        });
    }
    Ok(())
}

/// Squared continuous trip norm (inhomogeneous `H⁻¹` sup plus `L²(Q_T)`).
pub fn trip_norm_continuous(times: &[f64], path: &[FineGridFunction]) -> Result<TripNorm, ReconstructError> {
    check_path(times, path.len())?;
    let mut sup_part = 0.0f64;
    let mut l2 = Vec::with_capacity(path.len());
    for f in path {
        sup_part = sup_part.max(f.sobolev_norm(-1.0, false, MeanPolicy::Remove)?.powi(2));
        l2.push(l2_norm_sq(&f.samples));
    }
    Ok(TripNorm {
        sup_part,
        integral_part: trapezoid(times, &l2),
    })
}

/// Squared lattice trip norm built from `‖·‖₋₁,M` and `‖σ_M(·)‖_{L²}`.
pub fn trip_norm_discrete(
    lap: &PeriodicLaplacian,
    times: &[f64],
    path: &[GridVector],
) -> Result<TripNorm, ReconstructError> {
    check_path(times, path.len())?;
    let mut sup_part = 0.0f64;
    let mut l2 = Vec::with_capacity(path.len());
    for u in path {
        sup_part = sup_part.max(lap.neg_sobolev_norm_sq(u)?);
        l2.push(l2_norm_sq(u));
    }
    Ok(TripNorm {
        sup_part,
        integral_part: trapezoid(times, &l2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn step_conventions() {
        let s = StepFunction::new(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.eval(0.25), 1.0);
        assert_eq!(s.eval(0.2500001), 2.0);
        assert_eq!(s.eval(0.0), 4.0);
        assert_eq!(s.eval(1.0), 4.0);
        assert_eq!(s.eval(0.01), 1.0);
        assert_eq!(StepFunction::new(vec![1.0, 0.0, 0.0, 0.0]).lp_norm(2.0), 0.5);
        assert_eq!(StepFunction::new(vec![-3.0; 5]).lp_norm(1.0), 3.0);
    }

    #[test]
    fn linear_nodes_and_hat_norm() {
        let u = vec![1.0, 0.0, 0.0, 0.0];
        let f = PiecewiseLinear::new(u.clone());
        for k in 1..=4 {
            assert_eq!(f.eval(k as f64 / 4.0), u[k - 1]);
        }
        assert!((f.eval(0.125) - 0.5).abs() < 1e-15);
        let l2 = f.lp_norm(2.0).unwrap();
        assert!((l2 * l2 - 1.0 / 6.0).abs() < 1e-15);
        assert!((f.lp_norm(1.0).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(
            f.lp_norm(3.0),
            Err(ReconstructError::UnsupportedExponent(3.0))
        );
    }

    #[test]
    fn linear_l1_with_sign_change() {
        // a = 1, b = -1 on one segment of width 1/2: two triangles of area 1/8.
        let f = PiecewiseLinear::new(vec![1.0, -1.0]);
        assert!((f.lp_norm(1.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn nodal_interpolation_of_sine() {
        let v = interpolate_nodal(|x| (2.0 * PI * x).sin(), 4);
        let expect = [1.0, 0.0, -1.0, 0.0];
        for (a, b) in v.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(interpolate_nodal(|_| 2.0, 3), vec![2.0; 3]);
    }

    #[test]
    fn resample_modes() {
        let lin = resample(&[1.0, 3.0, 5.0, 7.0], 8, ResampleMode::Linear).unwrap();
        // fine nodes 1/8, 2/8, ...: midpoint of (x_0 = x_4, x_1) first
        assert_eq!(lin.samples, vec![4.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        let st = resample(&[1.0, 3.0, 5.0, 7.0], 8, ResampleMode::Step).unwrap();
        assert_eq!(st.samples, vec![1.0, 1.0, 3.0, 3.0, 5.0, 5.0, 7.0, 7.0]);
        assert_eq!(
            resample(&[1.0; 3], 8, ResampleMode::Step),
            Err(ReconstructError::NotDivisible { coarse: 3, fine: 8 })
        );
        let c = resample(&[2.0; 4], 16, ResampleMode::Linear).unwrap();
        assert!(c.samples.iter().all(|&x| x == 2.0));
    }

    #[test]
    fn fourier_norm_examples() {
        let c = FineGridFunction::from_fn(|_| -3.0, 64);
        assert!((c.sobolev_norm(-1.0, false, MeanPolicy::Require).unwrap() - 3.0).abs() < 1e-13);
        let cos = FineGridFunction::from_fn(|x| (2.0 * PI * x).cos(), 256);
        assert!((cos.sobolev_norm(-1.0, false, MeanPolicy::Require).unwrap() - 0.5).abs() < 1e-13);
        let h = cos.sobolev_norm(-1.0, true, MeanPolicy::Require).unwrap();
        assert!((h - 0.5f64.sqrt()).abs() < 1e-13);
        assert!(matches!(
            c.sobolev_norm(-1.0, true, MeanPolicy::Require),
            Err(ReconstructError::NonZeroMean(_))
        ));
        assert_eq!(c.sobolev_norm(-1.0, true, MeanPolicy::Remove).unwrap(), 0.0);
        let l2 = cos.sobolev_norm(0.0, false, MeanPolicy::Require).unwrap();
        assert!((l2 - cos.l2_norm()).abs() < 1e-13);
    }

    #[test]
    fn trip_norm_degenerate_paths() {
        let lap = PeriodicLaplacian::new(4).unwrap();
        let times = [0.0, 0.5, 1.0];
        let zero = vec![vec![0.0; 4]; 3];
        assert_eq!(trip_norm_discrete(&lap, &times, &zero).unwrap().value(), 0.0);
        let c = 1.5;
        let constant = vec![vec![c; 4]; 3];
        let t = trip_norm_discrete(&lap, &times, &constant).unwrap();
        assert!((t.value() - (c * c + c * c).sqrt()).abs() < 1e-14);
        assert!(matches!(
            trip_norm_discrete(&lap, &[0.0, 1.0, 0.5], &zero),
            Err(ReconstructError::Schedule(_))
        ));
        assert!(matches!(
            trip_norm_discrete(&lap, &[], &[]),
            Err(ReconstructError::Schedule(_))
        ));
    }

    #[test]
    fn continuous_trip_norm_constant_in_time() {
        let f = FineGridFunction::from_fn(|x| 1.0 + (2.0 * PI * x).cos(), 128);
        let times = [0.0, 0.25, 0.7];
        let path = vec![f.clone(); 3];
        let t = trip_norm_continuous(&times, &path).unwrap();
        let h = f.sobolev_norm(-1.0, false, MeanPolicy::Require).unwrap();
        let expect = (h * h + 0.7 * f.l2_norm().powi(2)).sqrt();
        assert!((t.value() - expect).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn step_norm_is_grid_norm(u in prop::collection::vec(-5.0f64..5.0, 1..64), p in 1.0f64..6.0) {
            let s = StepFunction::new(u.clone());
            prop_assert_eq!(s.lp_norm(p), lp_norm(&u, p));
        }

        #[test]
        fn linear_dominated_by_step(u in prop::collection::vec(-5.0f64..5.0, 3..64)) {
            let pl = PiecewiseLinear::new(u.clone());
            for p in [1.0, 2.0] {
                prop_assert!(pl.lp_norm(p).unwrap() <= lp_norm(&u, p) * (1.0 + 1e-12) + 1e-300);
            }
        }

        #[test]
        fn positive_cone_lower_bound(u in prop::collection::vec(0.0f64..5.0, 3..64)) {
            let pl = PiecewiseLinear::new(u.clone());
            let lin = pl.lp_norm(2.0).unwrap().powi(2);
            prop_assert!(lin >= (2.0 / 3.0) * l2_norm_sq(&u) * (1.0 - 1e-12));
        }

        #[test]
        fn step_resample_preserves_l2(u in prop::collection::vec(-5.0f64..5.0, 1..16), r in 1usize..8) {
            let f = resample(&u, u.len() * r, ResampleMode::Step).unwrap();
            prop_assert!((f.l2_norm() - lp_norm(&u, 2.0)).abs() <= 1e-13 * lp_norm(&u, 2.0).max(1.0));
        }

        #[test]
        fn linear_resample_hits_nodes(u in prop::collection::vec(-5.0f64..5.0, 3..16), r in 1usize..8) {
            let f = resample(&u, u.len() * r, ResampleMode::Linear).unwrap();
            for (k, &uk) in u.iter().enumerate() {
                prop_assert_eq!(f.samples[(k + 1) * r - 1], uk);
            }
        }

        #[test]
        fn nodal_eval_is_exact(u in prop::collection::vec(-5.0f64..5.0, 3..64)) {
            let m = u.len();
            let pl = PiecewiseLinear::new(u.clone());
            for k in 1..=m {
                prop_assert_eq!(pl.eval(k as f64 / m as f64), u[k - 1]);
            }
        }
    }
}
