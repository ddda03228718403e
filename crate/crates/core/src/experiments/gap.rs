//! The gap `Z = û − U`, `W = v̂ − V` between a reference solution and a
//! walker path, written as a Kolmogorov system driven by the walker
//! martingale.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::duality_check::{
    verify_combined, CadlagPath, CombinedInputs, CombinedOutcome, DualityError, EnvCoefficient, FnField,
    PiecewiseConstant, Side, SolverConfig, TimeField,
};
use crate::grid_ops::{GridVector, PeriodicLaplacian};
use crate::params::SktParams;
use crate::walkers::{replay, CountsState, PathRecord, Species, WalkError};

use super::ExperimentError;

/// A reference pair `(û, v̂)` known in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    /// Spatially constant densities: exact for both the lattice and the
    /// continuum system.
    Constant { u: f64, v: f64 },
    /// `u + ε e^{-κt} cos 2πx`, `v + ε e^{-κt} sin 2πx`; not an exact
    /// solution, the defect is carried by the remainder.
    Modes { u: f64, v: f64, eps: f64, kappa: f64 },
}

impl Target {
    pub fn eval(&self, m: usize, t: f64) -> (GridVector, GridVector) {
        match *self {
            Target::Constant { u, v } => (vec![u; m], vec![v; m]),
            Target::Modes { u, v, eps, kappa } => {
                let a = eps * (-kappa * t).exp();
                let x = |j: usize| 2.0 * PI * (j + 1) as f64 / m as f64;
                (
                    (0..m).map(|j| u + a * x(j).cos()).collect(),
                    (0..m).map(|j| v + a * x(j).sin()).collect(),
                )
            }
        }
    }

    fn time_derivative(&self, m: usize, t: f64) -> (GridVector, GridVector) {
        match *self {
            Target::Constant { .. } => (vec![0.0; m], vec![0.0; m]),
            Target::Modes { u, v, eps, kappa } => {
                let (a, b) = Target::Modes { u, v, eps, kappa }.eval(m, t);
                (
                    a.iter().map(|x| -kappa * (x - u)).collect(),
                    b.iter().map(|x| -kappa * (x - v)).collect(),
                )
            }
        }
    }

    /// `û' − Δ_M(d1 û + a12 û v̂)` and its species-2 analog.
    pub fn remainder(&self, lap: &PeriodicLaplacian, p: &SktParams, t: f64) -> (GridVector, GridVector) {
        let m = lap.sites();
        let (u, v) = self.eval(m, t);
        let (du, dv) = self.time_derivative(m, t);
        let gu: Vec<f64> = (0..m).map(|j| p.d1 * u[j] + p.a12 * u[j] * v[j]).collect();
        let gv: Vec<f64> = (0..m).map(|j| p.d2 * v[j] + p.a21 * u[j] * v[j]).collect();
        let lu = lap.apply(&gu).expect("sizes agree");
        let lv = lap.apply(&gv).expect("sizes agree");
        (
            du.iter().zip(&lu).map(|(a, b)| a - b).collect(),
            dv.iter().zip(&lv).map(|(a, b)| a - b).collect(),
        )
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Target::Constant { .. })
    }

    /// Sup norms over `[0, ∞)` for the smallness check.
    pub fn sup_norms(&self) -> (f64, f64) {
        match *self {
            Target::Constant { u, v } => (u.abs(), v.abs()),
            Target::Modes { u, v, eps, .. } => (u.abs() + eps.abs(), v.abs() + eps.abs()),
        }
    }
}

/// Species densities after every event: knots `[0, t_1, …, t_n]`.
struct EventStates {
    knots: Vec<f64>,
    u: Vec<GridVector>,
    v: Vec<GridVector>,
}

fn event_states(state0: &CountsState, path: &PathRecord) -> Result<EventStates, WalkError> {
    let events = path.events.as_deref().ok_or(WalkError::MissingEvents)?;
    let mut out = EventStates {
        knots: vec![0.0],
        u: vec![state0.u()],
        v: vec![state0.v()],
    };
    replay(state0, events, |t, s| {
        if t > *out.knots.last().expect("nonempty") {
            out.knots.push(t);
            out.u.push(s.u());
            out.v.push(s.v());
        } else {
            // simultaneous events collapse into one knot
            *out.u.last_mut().expect("nonempty") = s.u();
            *out.v.last_mut().expect("nonempty") = s.v();
        }
    });
    Ok(out)
}

/// `x_d = −ℳ`: affine between events with slope `Δ_M g(X)`, jumping by
/// `−ΔX` at each event.
fn negative_martingale(
    lap: &PeriodicLaplacian,
    knots: &[f64],
    own: &[GridVector],
    other: &[GridVector],
    d: f64,
    a: f64,
) -> CadlagPath {
    let m = lap.sites();
    let mut values = Vec::with_capacity(knots.len());
    let mut slopes = Vec::with_capacity(knots.len());
    let mut x = vec![0.0; m];
    for k in 0..knots.len() {
        if k > 0 {
            let dt = knots[k] - knots[k - 1];
            let s: &GridVector = &slopes[k - 1];
            for j in 0..m {
                x[j] += s[j] * dt - (own[k][j] - own[k - 1][j]);
            }
        }
        let g: Vec<f64> = (0..m).map(|j| d * own[k][j] + a * own[k][j] * other[k][j]).collect();
        slopes.push(lap.apply(&g).expect("sizes agree"));
        values.push(x.clone());
    }
    CadlagPath::new(knots.to_vec(), values, slopes)
}

/// One species' gap equation `z' = Δ_M[z⊙μ + f] + r − ℳ'`.
pub struct GapEquation {
    pub z0: GridVector,
    pub env: EnvCoefficient,
    pub f: Box<dyn TimeField>,
    pub remainder: Option<Box<dyn TimeField>>,
    pub xd: CadlagPath,
    /// `û(t_s) − U(t_s)` at the path schedule.
    pub observed: Vec<GridVector>,
}

/// Both gap equations assembled from a walker path with recorded events.
pub struct GapDecomposition {
    pub params: SktParams,
    pub target: Target,
    pub times: Vec<f64>,
    pub z: GapEquation,
    pub w: GapEquation,
}

#[derive(Debug, Clone)]
pub struct GapCheck {
    pub outcome: CombinedOutcome,
    /// Largest `|z_solved − (û − U)|` at scheduled times.
    pub exactness: f64,
}

impl GapDecomposition {
    pub fn new(state0: &CountsState, path: &PathRecord, target: Target) -> Result<Self, ExperimentError> {
        let m = state0.sites();
        let lap = PeriodicLaplacian::new(m).map_err(WalkError::from)?;
        let p = path.params;
        let ev = event_states(state0, path)?;

        let observed = |species: Species| -> Vec<GridVector> {
            path.states
                .iter()
                .zip(&path.times)
                .map(|(s, &t)| {
                    let (tu, tv) = target.eval(m, t);
                    let (hat, x) = match species {
                        Species::U => (tu, s.u()),
                        Species::V => (tv, s.v()),
                    };
                    hat.iter().zip(&x).map(|(a, b)| a - b).collect()
                })
                .collect()
        };

        let build = |species: Species| -> Result<GapEquation, ExperimentError> {
            let (own, other, d, a) = match species {
                Species::U => (&ev.u, &ev.v, p.d1, p.a12),
                Species::V => (&ev.v, &ev.u, p.d2, p.a21),
            };
            let env_pieces = PiecewiseConstant::new(
                ev.knots.clone(),
                other.iter().map(|o| o.iter().map(|x| d + a * x).collect()).collect(),
            );
            let sup = env_pieces
                .values()
                .iter()
                .flat_map(|v| v.iter().copied())
                .fold(d, f64::max);
            let env = EnvCoefficient::new(Arc::new(env_pieces), d, sup)?;

            let f: Box<dyn TimeField> = match target {
                Target::Constant { u, v } => {
                    let (scale, hat) = match species {
                        Species::U => (a * u, v),
                        Species::V => (a * v, u),
                    };
                    Box::new(PiecewiseConstant::new(
                        ev.knots.clone(),
                        other.iter().map(|o| o.iter().map(|x| scale * (hat - x)).collect()).collect(),
                    ))
                }
                Target::Modes { .. } => Box::new(ModesCoupling {
                    target,
                    species,
                    a,
                    pieces: PiecewiseConstant::new(ev.knots.clone(), other.clone()),
                }),
            };
            let remainder: Option<Box<dyn TimeField>> = if target.is_constant() {
                None
            } else {
                let lap = lap.clone();
                Some(Box::new(FnField::new(m, move |t, out: &mut [f64]| {
                    let (r, s) = target.remainder(&lap, &p, t);
                    out.copy_from_slice(match species {
                        Species::U => &r,
                        Species::V => &s,
                    });
                })))
            };
            let xd = negative_martingale(&lap, &ev.knots, own, other, d, a);
            let obs = observed(species);
            Ok(GapEquation {
                z0: obs[0].clone(),
                env,
                f,
                remainder,
                xd,
                observed: obs,
            })
        };
        Ok(Self {
            params: p,
            target,
            times: path.times.clone(),
            z: build(Species::U)?,
            w: build(Species::V)?,
        })
    }

    /// Combined certificate for one species and the residual between the
    /// solved gap and the observed gap.
    pub fn certify(&self, species: Species, a: f64, config: &SolverConfig) -> Result<GapCheck, DualityError> {
        let eq = match species {
            Species::U => &self.z,
            Species::V => &self.w,
        };
        let outcome = verify_combined(
            &CombinedInputs {
                z0: &eq.z0,
                env: &eq.env,
                f: Some(eq.f.as_ref()),
                xr_prime: eq.remainder.as_deref(),
                xd: &eq.xd,
                schedule: &self.times,
            },
            a,
            config,
        )?;
        let mut exactness = 0.0f64;
        for (rec, obs) in outcome.solution.scheduled().zip(&eq.observed) {
            for (x, y) in rec.z.iter().zip(obs) {
                exactness = exactness.max((x - y).abs());
            }
        }
        Ok(GapCheck { outcome, exactness })
    }
}

/// `a · ĥ(t) ⊙ (ĝ(t) − X(t))` for the smooth target: `ĥ` is this species'
/// target and `ĝ − X` the other species' gap.
struct ModesCoupling {
    target: Target,
    species: Species,
    a: f64,
    pieces: PiecewiseConstant,
}

impl TimeField for ModesCoupling {
    fn sites(&self) -> usize {
        self.pieces.sites()
    }

    fn eval_into(&self, t: f64, side: Side, out: &mut [f64]) {
        let m = out.len();
        self.pieces.eval_into(t, side, out);
        let (tu, tv) = self.target.eval(m, t);
        let (own, other) = match self.species {
            Species::U => (tu, tv),
            Species::V => (tv, tu),
        };
        for j in 0..m {
            out[j] = self.a * own[j] * (other[j] - out[j]);
        }
    }

    fn breakpoints(&self) -> &[f64] {
        self.pieces.breakpoints()
    }
}
