//! Fourth-order integration of lattice Kolmogorov equations
//! `z' = Δ_M[z⊙μ + f] + r`, optionally driven by a càdlàg path `x_d`, with
//! the running space-time integrals needed by the duality certificates.

use std::sync::Arc;

use super::fields::{CadlagPath, Side, TimeField};
use super::DualityError;
use crate::grid_ops::{l2_norm_sq, mean_of, PeriodicLaplacian};
use crate::params::validate_schedule;

/// Diffusivity `μ(t)` together with a certified lower bound `α` and an upper
/// bound used for the step size.
#[derive(Clone)]
pub struct EnvCoefficient {
    field: Arc<dyn TimeField>,
    alpha: f64,
    sup: f64,
}

impl std::fmt::Debug for EnvCoefficient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EnvCoefficient")
            .field("m", &self.field.sites())
            .field("alpha", &self.alpha)
            .field("sup", &self.sup)
            .finish()
    }
}

impl EnvCoefficient {
    pub fn new(field: Arc<dyn TimeField>, alpha: f64, sup: f64) -> Result<Self, DualityError> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(DualityError::NonPositiveAlpha(alpha));
        }
        if !(sup >= alpha) || !sup.is_finite() {
            return Err(DualityError::BadUpperBound { alpha, sup });
        }
        Ok(Self { field, alpha, sup })
    }

    /// Time-independent coefficient with `α = min μ` and `sup = max μ`.
    pub fn constant(values: Vec<f64>) -> Result<Self, DualityError> {
        let alpha = values.iter().copied().fold(f64::INFINITY, f64::min);
        let sup = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::new(Arc::new(super::fields::ConstantField(values)), alpha, sup)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sup(&self) -> f64 {
        self.sup
    }

    pub fn field(&self) -> &dyn TimeField {
        self.field.as_ref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Steps satisfy `4M² sup μ dt ≤ safety`.
    pub safety: f64,
    /// Keep both one-sided values at every jump of `x_d`.
    pub record_jumps: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            safety: 0.1,
            record_jumps: true,
        }
    }
}

/// Inputs of one solve. Absent sources are zero.
#[derive(Clone, Copy)]
pub struct KolmogorovProblem<'a> {
    pub z0: &'a [f64],
    pub env: &'a EnvCoefficient,
    pub f: Option<&'a dyn TimeField>,
    pub r: Option<&'a dyn TimeField>,
    pub xd: Option<&'a CadlagPath>,
    pub schedule: &'a [f64],
}

/// Cumulative time integrals from 0.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Integrals {
    /// `∫ ‖z⊙μ^{1/2}‖²_{2,M}`
    pub weighted_energy: f64,
    /// `∫ [z]²_M [μ]_M`
    pub mean_sq_mu: f64,
    /// `∫ [μ]_M`
    pub mu_mean: f64,
    /// `∫ ‖f‖²_{2,M}`
    pub f_sq: f64,
    /// `∫ ‖r‖²_{2,M}`
    pub r_sq: f64,
    /// `∫ [μ]_M [x_d]²_M`
    pub xd_mean_sq_mu: f64,
}

impl Integrals {
    fn add_scaled(&mut self, w: f64, s: &Integrals) {
        self.weighted_energy += w * s.weighted_energy;
        self.mean_sq_mu += w * s.mean_sq_mu;
        self.mu_mean += w * s.mu_mean;
        self.f_sq += w * s.f_sq;
        self.r_sq += w * s.r_sq;
        self.xd_mean_sq_mu += w * s.xd_mean_sq_mu;
    }
}

/// State summary at one step endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub t: f64,
    /// `‖z‖²₋₁,M`
    pub z_neg_sq: f64,
    /// `‖z̃‖²₋₁,M`
    pub z_semi_sq: f64,
    pub z_mean: f64,
    /// `‖x_d‖²₋₁,M`
    pub xd_neg_sq: f64,
    pub integrals: Integrals,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Scheduled,
    JumpLeft,
    JumpRight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub time: f64,
    pub kind: RecordKind,
    pub z: Vec<f64>,
    pub at: Checkpoint,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub m: usize,
    pub t_final: f64,
    pub alpha: f64,
    pub records: Vec<Record>,
    pub checkpoints: Vec<Checkpoint>,
    /// Largest `|[z(t)] - [z(0)] - ∫[r] - Σ[jumps]|` over the records.
    pub mean_defect: f64,
    pub steps: usize,
    /// Whether a forcing path `x_d` was part of the problem.
    pub singular: bool,
}

impl Solution {
    pub fn scheduled(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| r.kind == RecordKind::Scheduled)
    }

    pub fn final_record(&self) -> &Record {
        self.scheduled().last().expect("a solution has at least two scheduled records")
    }

    pub fn sup_z_neg_sq(&self) -> f64 {
        self.checkpoints.iter().map(|c| c.z_neg_sq).fold(0.0, f64::max)
    }

    pub fn sup_xd_neg_sq(&self) -> f64 {
        self.checkpoints.iter().map(|c| c.xd_neg_sq).fold(0.0, f64::max)
    }

    pub fn final_integrals(&self) -> Integrals {
        self.checkpoints.last().expect("nonempty").integrals
    }
}

struct FieldValues {
    mu: Vec<f64>,
    f: Vec<f64>,
    r: Vec<f64>,
    xd: Vec<f64>,
}

impl FieldValues {
    fn new(m: usize) -> Self {
        Self {
            mu: vec![0.0; m],
            f: vec![0.0; m],
            r: vec![0.0; m],
            xd: vec![0.0; m],
        }
    }
}

struct Evaluator<'a> {
    p: &'a KolmogorovProblem<'a>,
    slopes: Option<super::fields::PiecewiseConstant>,
    lap: PeriodicLaplacian,
    scratch: Vec<f64>,
    slope_buf: Vec<f64>,
}

impl Evaluator<'_> {
    fn fields(&mut self, t: f64, side: Side, out: &mut FieldValues) -> Result<(), DualityError> {
        let p = self.p;
        p.env.field().eval_into(t, side, &mut out.mu);
        let alpha = p.env.alpha();
        if let Some((site, &value)) = out
            .mu
            .iter()
            .enumerate()
            .find(|(_, &v)| !(v >= alpha * (1.0 - 1e-12)))
        {
            return Err(DualityError::EnvBelowBound {
                time: t,
                site,
                value,
                alpha,
            });
        }
        match p.f {
            Some(f) => f.eval_into(t, side, &mut out.f),
            None => out.f.iter_mut().for_each(|x| *x = 0.0),
        }
        match p.r {
            Some(r) => r.eval_into(t, side, &mut out.r),
            None => out.r.iter_mut().for_each(|x| *x = 0.0),
        }
        match p.xd {
            Some(x) => x.eval_into(t, side, &mut out.xd),
            None => out.xd.iter_mut().for_each(|x| *x = 0.0),
        }
        Ok(())
    }

    /// Slope of `x_d` added to the regular source.
    fn slope(&mut self, t: f64, side: Side) -> Option<&[f64]> {
        let s = self.slopes.as_ref()?;
        s.eval_into(t, side, &mut self.slope_buf);
        Some(&self.slope_buf)
    }

    /// `out = Δ_M[z⊙μ + f] + r (+ x_d')`.
    fn rhs(&mut self, fv: &FieldValues, slope: Option<&[f64]>, z: &[f64], out: &mut [f64]) {
        for i in 0..z.len() {
            self.scratch[i] = z[i] * fv.mu[i] + fv.f[i];
        }
        self.lap
            .apply_into(&self.scratch, out)
            .expect("dimensions checked at entry");
        for i in 0..z.len() {
            out[i] += fv.r[i];
        }
        if let Some(s) = slope {
            for i in 0..z.len() {
                out[i] += s[i];
            }
        }
    }
}

fn sorted_union(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    v.dedup();
    v
}

fn contains(sorted: &[f64], t: f64) -> Option<usize> {
    sorted.binary_search_by(|x| x.partial_cmp(&t).expect("finite times")).ok()
}

/// Pointwise integrand values at one time for Simpson's rule.
fn integrand(z: &[f64], fv: &FieldValues, r_total: &[f64]) -> (Integrals, f64) {
    let m = z.len() as f64;
    let zmean = mean_of(z);
    let mu_mean = mean_of(&fv.mu);
    let weighted = crate::numeric::compensated_sum(z.iter().zip(&fv.mu).map(|(a, b)| a * a * b)) / m;
    let xdm = mean_of(&fv.xd);
    (
        Integrals {
            weighted_energy: weighted,
            mean_sq_mu: zmean * zmean * mu_mean,
            mu_mean,
            f_sq: l2_norm_sq(&fv.f),
            r_sq: l2_norm_sq(&fv.r),
            xd_mean_sq_mu: mu_mean * xdm * xdm,
        },
        mean_of(r_total),
    )
}

/// Integrates the problem over `[0, T]` with `T` the last schedule time.
pub fn solve(problem: &KolmogorovProblem<'_>, config: &SolverConfig) -> Result<Solution, DualityError> {
    validate_schedule(problem.schedule, 2)?;
    let m = problem.z0.len();
    let t_final = *problem.schedule.last().expect("validated");
    let lap = PeriodicLaplacian::new(m)?;
    let fields: [Option<&dyn TimeField>; 3] = [Some(problem.env.field()), problem.f, problem.r];
    for f in fields.into_iter().flatten() {
        if f.sites() != m {
            return Err(DualityError::DimensionMismatch {
                expected: m,
                got: f.sites(),
            });
        }
    }
    let mut jump_knots: Vec<f64> = Vec::new();
    if let Some(xd) = problem.xd {
        if xd.sites() != m {
            return Err(DualityError::DimensionMismatch {
                expected: m,
                got: xd.sites(),
            });
        }
        let knots = xd.knots();
        if knots[0] != 0.0 {
            return Err(DualityError::JumpOutsideWindow { time: knots[0], t_final });
        }
        if let Some(&bad) = knots.iter().find(|&&k| k > t_final) {
            return Err(DualityError::JumpOutsideWindow { time: bad, t_final });
        }
        jump_knots = knots[1..].to_vec();
    }
    if !(config.safety > 0.0) {
        return Err(DualityError::BadSafety(config.safety));
    }

    let mut breaks: Vec<f64> = problem.schedule[1..].to_vec();
    for f in [Some(problem.env.field()), problem.f, problem.r].into_iter().flatten() {
        breaks.extend(f.breakpoints().iter().copied().filter(|&t| t > 0.0 && t < t_final));
    }
    breaks.extend(jump_knots.iter().copied());
    let breaks = sorted_union(breaks);

    let dt_max = config.safety / (4.0 * (m * m) as f64 * problem.env.sup());
    let mut ev = Evaluator {
        p: problem,
        slopes: problem.xd.filter(|x| x.has_slopes()).map(|x| x.derivative()),
        lap: lap.clone(),
        scratch: vec![0.0; m],
        slope_buf: vec![0.0; m],
    };

    let mut z: Vec<f64> = problem.z0.to_vec();
    if let Some(xd) = problem.xd {
        for (a, b) in z.iter_mut().zip(xd.initial()) {
            *a += b;
        }
    }
    let mean0 = mean_of(&z);
    let mut expected_mean_shift = crate::numeric::CompensatedSum::new();
    let mut mean_defect = 0.0f64;

    let neg = |v: &[f64]| -> (f64, f64) {
        let semi = lap.neg_sobolev_seminorm_sq(v).expect("dimension checked");
        let mean = mean_of(v);
        (semi + mean * mean, semi)
    };

    let mut fa = FieldValues::new(m);
    let mut fm = FieldValues::new(m);
    let mut fb = FieldValues::new(m);
    let mut k = [vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]];
    let mut kb = vec![0.0; m];
    let mut stage = vec![0.0; m];
    let mut zmid = vec![0.0; m];
    let mut r_a = vec![0.0; m];
    let mut r_m = vec![0.0; m];
    let mut r_b = vec![0.0; m];

    ev.fields(0.0, Side::Right, &mut fa)?;
    let (zn, zs) = neg(&z);
    let (xn, _) = neg(&fa.xd);
    let mut integrals = Integrals::default();
    let mut checkpoints = vec![Checkpoint {
        t: 0.0,
        z_neg_sq: zn,
        z_semi_sq: zs,
        z_mean: mean0,
        xd_neg_sq: xn,
        integrals,
    }];
    let mut records = vec![Record {
        time: 0.0,
        kind: RecordKind::Scheduled,
        z: z.clone(),
        at: checkpoints[0],
    }];
    let mut steps = 0usize;
    let mut t_left = 0.0;

    for &b in &breaks {
        let span = b - t_left;
        let n = ((span / dt_max) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = span / n as f64;
        for s in 0..n {
            let ta = t_left + s as f64 * h;
            let tb = if s + 1 == n { b } else { t_left + (s + 1) as f64 * h };
            let h = tb - ta;
            let tm = ta + 0.5 * h;
            ev.fields(ta, Side::Right, &mut fa)?;
            ev.fields(tm, Side::Right, &mut fm)?;
            ev.fields(tb, Side::Left, &mut fb)?;

            let sa = ev.slope(ta, Side::Right).map(|x| x.to_vec());
            let sm = ev.slope(tm, Side::Right).map(|x| x.to_vec());
            let sb = ev.slope(tb, Side::Left).map(|x| x.to_vec());

            ev.rhs(&fa, sa.as_deref(), &z, &mut k[0]);
            for i in 0..m {
                stage[i] = z[i] + 0.5 * h * k[0][i];
            }
            ev.rhs(&fm, sm.as_deref(), &stage, &mut k[1]);
            for i in 0..m {
                stage[i] = z[i] + 0.5 * h * k[1][i];
            }
            ev.rhs(&fm, sm.as_deref(), &stage, &mut k[2]);
            for i in 0..m {
                stage[i] = z[i] + h * k[2][i];
            }
            ev.rhs(&fb, sb.as_deref(), &stage, &mut k[3]);
            let za = z.clone();
            for i in 0..m {
                z[i] += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
            }
            ev.rhs(&fb, sb.as_deref(), &z, &mut kb);
            for i in 0..m {
                zmid[i] = 0.5 * (za[i] + z[i]) + h / 8.0 * (k[0][i] - kb[i]);
            }
            for (buf, fv, sl) in [(&mut r_a, &fa, &sa), (&mut r_m, &fm, &sm), (&mut r_b, &fb, &sb)] {
                buf.copy_from_slice(&fv.r);
                if let Some(sl) = sl {
                    for i in 0..m {
                        buf[i] += sl[i];
                    }
                }
            }
            let (ia, ma) = integrand(&za, &fa, &r_a);
            let (im, mm) = integrand(&zmid, &fm, &r_m);
            let (ib, mb) = integrand(&z, &fb, &r_b);
            integrals.add_scaled(h / 6.0, &ia);
            integrals.add_scaled(4.0 * h / 6.0, &im);
            integrals.add_scaled(h / 6.0, &ib);
            expected_mean_shift.add(h / 6.0 * (ma + 4.0 * mm + mb));
            steps += 1;

            if z.iter().any(|x| !x.is_finite()) {
                return Err(DualityError::NonFinite(tb));
            }
            let (zn, zs) = neg(&z);
            let (xn, _) = neg(&fb.xd);
            checkpoints.push(Checkpoint {
                t: tb,
                z_neg_sq: zn,
                z_semi_sq: zs,
                z_mean: mean_of(&z),
                xd_neg_sq: xn,
                integrals,
            });
        }
        t_left = b;

        if let (Some(xd), Some(kidx)) = (problem.xd, contains(&jump_knots, b)) {
            if config.record_jumps {
                records.push(Record {
                    time: b,
                    kind: RecordKind::JumpLeft,
                    z: z.clone(),
                    at: *checkpoints.last().expect("nonempty"),
                });
            }
            let jump = xd.jump(kidx + 1);
            for (a, j) in z.iter_mut().zip(&jump) {
                *a += j;
            }
            expected_mean_shift.add(mean_of(&jump));
            let (zn, zs) = neg(&z);
            let xr = xd.eval(b, Side::Right);
            let (xn, _) = neg(&xr);
            checkpoints.push(Checkpoint {
                t: b,
                z_neg_sq: zn,
                z_semi_sq: zs,
                z_mean: mean_of(&z),
                xd_neg_sq: xn,
                integrals,
            });
            if config.record_jumps {
                records.push(Record {
                    time: b,
                    kind: RecordKind::JumpRight,
                    z: z.clone(),
                    at: *checkpoints.last().expect("nonempty"),
                });
            }
        }
        if contains(problem.schedule, b).is_some() {
            let defect = (mean_of(&z) - mean0 - expected_mean_shift.value()).abs();
            mean_defect = mean_defect.max(defect);
            records.push(Record {
                time: b,
                kind: RecordKind::Scheduled,
                z: z.clone(),
                at: *checkpoints.last().expect("nonempty"),
            });
        }
    }

    Ok(Solution {
        m,
        t_final,
        alpha: problem.env.alpha(),
        records,
        checkpoints,
        mean_defect,
        steps,
        singular: problem.xd.is_some(),
    })
}
