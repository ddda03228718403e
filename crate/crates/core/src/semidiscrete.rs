//! The semi-discrete SKT system on the discrete torus,
//! `u' = Δ_M(d1 u + a12 u⊙v)`, `v' = Δ_M(d2 v + a21 u⊙v)`, integrated with the
//! classical fourth-order Runge–Kutta method.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid_ops::{laplacian_eigenvalue, lp_norm, GridError, GridVector, PeriodicLaplacian};
use crate::params::{validate_schedule, ScheduleError, SktParams};
use crate::walkers::Species;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemiError {
    #[error("species {species:?} became negative ({value:e}) at site {site}, t = {time}")]
    Negative {
        species: Species,
        site: usize,
        value: f64,
        time: f64,
    },
    #[error("step size must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("u and v have lengths {u} and {v}")]
    LengthMismatch { u: usize, v: usize },
    #[error("solution blew up (non-finite value) at t = {0}")]
    NonFinite(f64),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeState {
    pub u: GridVector,
    pub v: GridVector,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepRule {
    /// `dt = safety / (4M² μ_max)`, recomputed at every snapshot.
    Stability { safety: f64 },
    /// Uniform step, shortened so that snapshots are hit exactly.
    Fixed { dt: f64 },
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Stability { safety: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NegativityPolicy {
    #[default]
    Warn,
    Reject,
}

/// Components below this count as negative.
pub const NEGATIVITY_TOLERANCE: f64 = -1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub step: StepRule,
    pub negativity: NegativityPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<OdeState>,
    /// Steps after which some component was below the negativity tolerance.
    pub negativity_warnings: usize,
    pub steps: usize,
}

/// Right-hand side of the semi-discrete system.
pub fn rhs(
    lap: &PeriodicLaplacian,
    u: &[f64],
    v: &[f64],
    params: &SktParams,
) -> Result<(GridVector, GridVector), GridError> {
    let mut du = vec![0.0; u.len()];
    let mut dv = vec![0.0; v.len()];
    rhs_into(lap, u, v, params, &mut du, &mut dv, &mut vec![0.0; u.len()])?;
    Ok((du, dv))
}

fn rhs_into(
    lap: &PeriodicLaplacian,
    u: &[f64],
    v: &[f64],
    p: &SktParams,
    du: &mut [f64],
    dv: &mut [f64],
    scratch: &mut [f64],
) -> Result<(), GridError> {
    for i in 0..u.len() {
        scratch[i] = u[i] * (p.d1 + p.a12 * v[i]);
    }
    lap.apply_into(scratch, du)?;
    for i in 0..v.len() {
        scratch[i] = v[i] * (p.d2 + p.a21 * u[i]);
    }
    lap.apply_into(scratch, dv)
}

/// `max(d1 + a12‖v‖∞, d2 + a21‖u‖∞)`.
pub fn mu_max(u: &[f64], v: &[f64], p: &SktParams) -> f64 {
    let su = lp_norm(u, f64::INFINITY);
    let sv = lp_norm(v, f64::INFINITY);
    (p.d1 + p.a12 * sv).max(p.d2 + p.a21 * su)
}

struct Rk4Work {
    k: [(Vec<f64>, Vec<f64>); 4],
    tu: Vec<f64>,
    tv: Vec<f64>,
    scratch: Vec<f64>,
}

impl Rk4Work {
    fn new(m: usize) -> Self {
        let pair = || (vec![0.0; m], vec![0.0; m]);
        Self {
            k: [pair(), pair(), pair(), pair()],
            tu: vec![0.0; m],
            tv: vec![0.0; m],
            scratch: vec![0.0; m],
        }
    }
}

fn rk4_step(
    lap: &PeriodicLaplacian,
    p: &SktParams,
    u: &mut [f64],
    v: &mut [f64],
    dt: f64,
    w: &mut Rk4Work,
) -> Result<(), GridError> {
    let m = u.len();
    let coeffs = [0.0, 0.5, 0.5, 1.0];
    for s in 0..4 {
        if s == 0 {
            w.tu.copy_from_slice(u);
            w.tv.copy_from_slice(v);
        } else {
            let c = coeffs[s] * dt;
            let (pu, pv) = &w.k[s - 1];
            for i in 0..m {
                w.tu[i] = u[i] + c * pu[i];
                w.tv[i] = v[i] + c * pv[i];
            }
        }
        let (ku, kv) = &mut w.k[s];
        rhs_into(lap, &w.tu, &w.tv, p, ku, kv, &mut w.scratch)?;
    }
    let h = dt / 6.0;
    for i in 0..m {
        u[i] += h * (w.k[0].0[i] + 2.0 * w.k[1].0[i] + 2.0 * w.k[2].0[i] + w.k[3].0[i]);
        v[i] += h * (w.k[0].1[i] + 2.0 * w.k[1].1[i] + 2.0 * w.k[2].1[i] + w.k[3].1[i]);
    }
    Ok(())
}

fn first_negative(x: &[f64]) -> Option<(usize, f64)> {
    x.iter()
        .copied()
        .enumerate()
        .find(|&(_, val)| val < NEGATIVITY_TOLERANCE)
}

/// Integrates from `state0` and returns the solution at every `schedule` time
/// (the schedule is relative to `state0.time` and must start at 0).
pub fn integrate(
    state0: &OdeState,
    params: &SktParams,
    schedule: &[f64],
    config: &IntegratorConfig,
) -> Result<Trajectory, SemiError> {
    validate_schedule(schedule, 1)?;
    if state0.u.len() != state0.v.len() {
        return Err(SemiError::LengthMismatch {
            u: state0.u.len(),
            v: state0.v.len(),
        });
    }
    let m = state0.u.len();
    let lap = PeriodicLaplacian::new(m)?;
    let mut u = state0.u.clone();
    let mut v = state0.v.clone();
    let mut work = Rk4Work::new(m);
    let mut snapshots = Vec::with_capacity(schedule.len());
    snapshots.push(OdeState {
        u: u.clone(),
        v: v.clone(),
        time: state0.time,
    });
    let mut warnings = 0;
    let mut steps = 0;
    let m2 = (m * m) as f64;
    for w in schedule.windows(2) {
        let span = w[1] - w[0];
        let dt_target = match config.step {
            StepRule::Stability { safety } => {
                let mu = mu_max(&u, &v, params);
                if mu > 0.0 {
                    safety / (4.0 * m2 * mu)
                } else {
                    span
                }
            }
            StepRule::Fixed { dt } => dt,
        };
        if !(dt_target > 0.0) || !dt_target.is_finite() {
            return Err(SemiError::BadStep(dt_target));
        }
        let n = ((span / dt_target) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let dt = span / n as f64;
        for k in 0..n {
            rk4_step(&lap, params, &mut u, &mut v, dt, &mut work)?;
            steps += 1;
            let t = state0.time + w[0] + (k + 1) as f64 * dt;
            if u.iter().chain(&v).any(|x| !x.is_finite()) {
                return Err(SemiError::NonFinite(t));
            }
            let neg = first_negative(&u)
                .map(|(i, x)| (Species::U, i, x))
                .or_else(|| first_negative(&v).map(|(i, x)| (Species::V, i, x)));
            if let Some((species, site, value)) = neg {
                match config.negativity {
                    NegativityPolicy::Warn => warnings += 1,
                    NegativityPolicy::Reject => {
                        return Err(SemiError::Negative {
                            species,
                            site,
                            value,
                            time: t,
                        })
                    }
                }
            }
        }
        snapshots.push(OdeState {
            u: u.clone(),
            v: v.clone(),
            time: state0.time + w[1],
        });
    }
    Ok(Trajectory {
        snapshots,
        negativity_warnings: warnings,
        steps,
    })
}

/// `c + ε e^{-d λ_k t} cos(2πk x_j)` on the grid, the exact solution of the
/// decoupled lattice heat equation.
pub fn exact_decoupled_mode(c: f64, eps: f64, k: usize, d: f64, m: usize, t: f64) -> GridVector {
    assert!(k < m, "mode {k} out of range for {m} sites");
    let decay = eps * (-d * laplacian_eigenvalue(m, k) * t).exp();
    (1..=m)
        .map(|j| c + decay * (2.0 * PI * (k * j) as f64 / m as f64).cos())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_ops::mean_of;
    use crate::params::uniform_schedule;
    use proptest::prelude::*;

    #[test]
    fn constants_are_equilibria() {
        let lap = PeriodicLaplacian::new(6).unwrap();
        let p = SktParams::new(1.0, 2.0, 0.3, 0.7);
        let (du, dv) = rhs(&lap, &[1.3; 6], &[0.4; 6], &p).unwrap();
        assert!(du.iter().chain(&dv).all(|&x| x == 0.0));
        let s0 = OdeState { u: vec![1.3; 6], v: vec![0.4; 6], time: 0.0 };
        let tr = integrate(&s0, &p, &[0.0, 0.05, 0.1], &IntegratorConfig::default()).unwrap();
        for s in &tr.snapshots {
            assert!(s.u.iter().all(|&x| (x - 1.3).abs() < 1e-14));
        }
    }

    #[test]
    fn decoupled_rhs_is_heat() {
        let lap = PeriodicLaplacian::new(5).unwrap();
        let u = [1.0, 3.0, 0.0, 2.0, 5.0];
        let p = SktParams::new(0.7, 1.0, 0.0, 0.0);
        let (du, _) = rhs(&lap, &u, &[1.0; 5], &p).unwrap();
        let heat: Vec<f64> = lap.apply(&u).unwrap().iter().map(|x| 0.7 * x).collect();
        for (a, b) in du.iter().zip(heat) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_mode_limits() {
        let m0 = exact_decoupled_mode(1.0, 0.2, 2, 1.0, 8, 0.0);
        assert!((m0[7] - 1.2).abs() < 1e-15);
        let k0 = exact_decoupled_mode(1.0, 0.2, 0, 1.0, 8, 5.0);
        assert!(k0.iter().all(|&x| (x - 1.2).abs() < 1e-15));
        let late = exact_decoupled_mode(1.0, 0.2, 1, 1.0, 8, 10.0);
        assert!(late.iter().all(|&x| (x - 1.0).abs() < 1e-15));
    }

    #[test]
    fn reproduces_eigenmode() {
        let (c, eps, d, m, t) = (1.0, 0.3, 1.0, 16, 0.1);
        let s0 = OdeState {
            u: exact_decoupled_mode(c, eps, 1, d, m, 0.0),
            v: vec![1.0; m],
            time: 0.0,
        };
        let p = SktParams::new(d, 1.0, 0.0, 0.0);
        let tr = integrate(&s0, &p, &[0.0, t], &IntegratorConfig::default()).unwrap();
        let exact = exact_decoupled_mode(c, eps, 1, d, m, t);
        let err = tr.snapshots[1].u.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-8, "max error {err}");
    }

    #[test]
    fn fourth_order_in_time() {
        let (m, k, t) = (16, 4, 0.01);
        let p = SktParams::new(1.0, 1.0, 0.0, 0.0);
        let s0 = OdeState {
            u: exact_decoupled_mode(0.0, 1.0, k, 1.0, m, 0.0),
            v: vec![0.0; m],
            time: 0.0,
        };
        let exact = exact_decoupled_mode(0.0, 1.0, k, 1.0, m, t);
        let err = |n: usize| {
            let cfg = IntegratorConfig { step: StepRule::Fixed { dt: t / n as f64 }, ..Default::default() };
            let tr = integrate(&s0, &p, &[0.0, t], &cfg).unwrap();
            assert_eq!(tr.steps, n);
            tr.snapshots[1].u.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let (e1, e2, e3) = (err(20), err(40), err(80));
        for order in [(e1 / e2).log2(), (e2 / e3).log2()] {
            assert!((order - 4.0).abs() < 0.2, "observed order {order}");
        }
        // amplification factor of the scheme on the mode: R(z)^n
        let z = laplacian_eigenvalue(m, k) * t / 20.0;
        let r = 1.0 - z + z * z / 2.0 - z.powi(3) / 6.0 + z.powi(4) / 24.0;
        let predicted = (r.powi(20) - (-laplacian_eigenvalue(m, k) * t).exp()).abs();
        assert!((e1 - predicted).abs() <= 1e-6 * predicted + 1e-15);
    }

    #[test]
    fn reject_policy_stops_on_negative_values() {
        let m = 8;
        let mut u = vec![0.0; m];
        u[0] = 1.0;
        // explicit steps far beyond the stability limit overshoot below zero
        let s0 = OdeState { u, v: vec![0.0; m], time: 0.0 };
        let p = SktParams::new(1.0, 1.0, 0.0, 0.0);
        let cfg = IntegratorConfig { step: StepRule::Fixed { dt: 0.01 }, negativity: NegativityPolicy::Reject };
        assert!(matches!(integrate(&s0, &p, &[0.0, 0.01], &cfg), Err(SemiError::Negative { .. })));
        let warn = IntegratorConfig { negativity: NegativityPolicy::Warn, ..cfg };
        let tr = integrate(&s0, &p, &[0.0, 0.01], &warn).unwrap();
        assert!(tr.negativity_warnings > 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn mass_is_conserved(
            u in prop::collection::vec(0.1f64..2.0, 8),
            v in prop::collection::vec(0.1f64..2.0, 8),
            a12 in 0.0f64..1.0,
            a21 in 0.0f64..1.0,
        ) {
            let p = SktParams::new(1.0, 0.5, a12, a21);
            let s0 = OdeState { u: u.clone(), v: v.clone(), time: 0.0 };
            let tr = integrate(&s0, &p, &uniform_schedule(0.02, 3), &IntegratorConfig::default()).unwrap();
            let (mu0, mv0) = (mean_of(&u), mean_of(&v));
            for s in &tr.snapshots {
                prop_assert!((mean_of(&s.u) - mu0).abs() <= 1e-12 * mu0);
                prop_assert!((mean_of(&s.v) - mv0).abs() <= 1e-12 * mv0);
            }
        }
    }
}
