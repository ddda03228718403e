//! Time-dependent vector fields on the lattice: coefficients, sources and
//! càdlàg forcing paths.

use std::fmt;

/// Which one-sided limit to take at a discontinuity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A lattice vector depending on time, continuous except at its breakpoints.
pub trait TimeField: Send + Sync {
    fn sites(&self) -> usize;

    /// Writes the value at `t` (one-sided limit at breakpoints) into `out`.
    fn eval_into(&self, t: f64, side: Side, out: &mut [f64]);

    /// Sorted times where the field or its slope may jump.
    fn breakpoints(&self) -> &[f64] {
        &[]
    }

    fn eval(&self, t: f64, side: Side) -> Vec<f64> {
        let mut out = vec![0.0; self.sites()];
        self.eval_into(t, side, &mut out);
        out
    }
}

/// A field that does not depend on time.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantField(pub Vec<f64>);

impl TimeField for ConstantField {
    fn sites(&self) -> usize {
        self.0.len()
    }

    fn eval_into(&self, _t: f64, _side: Side, out: &mut [f64]) {
        out.copy_from_slice(&self.0);
    }
}

/// A continuous field given by a closure `f(t, out)`.
pub struct FnField<F> {
    m: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(f64, &mut [f64]) + Send + Sync,
{
    pub fn new(m: usize, f: F) -> Self {
        Self { m, f }
    }
}

impl<F> fmt::Debug for FnField<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnField").field("m", &self.m).finish()
    }
}

impl<F> TimeField for FnField<F>
where
    F: Fn(f64, &mut [f64]) + Send + Sync,
{
    fn sites(&self) -> usize {
        self.m
    }

    fn eval_into(&self, t: f64, _side: Side, out: &mut [f64]) {
        (self.f)(t, out)
    }
}

/// Index of the piece containing `t`: the last knot `≤ t` (right limits) or
/// `< t` (left limits). Times before the first knot map to piece 0.
fn piece(knots: &[f64], t: f64, side: Side) -> usize {
    let n = match side {
        Side::Right => knots.partition_point(|&k| k <= t),
        Side::Left => knots.partition_point(|&k| k < t),
    };
    n.saturating_sub(1)
}

fn check_knots(knots: &[f64]) {
    assert!(!knots.is_empty(), "a piecewise field needs at least one knot");
    assert!(
        knots.windows(2).all(|w| w[1] > w[0]) && knots.iter().all(|k| k.is_finite()),
        "knots must be finite and strictly increasing"
    );
}

/// Right-continuous piecewise-constant field: `values[k]` on `[knots[k], knots[k+1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant {
    knots: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl PiecewiseConstant {
    pub fn new(knots: Vec<f64>, values: Vec<Vec<f64>>) -> Self {
        check_knots(&knots);
        assert_eq!(knots.len(), values.len(), "one value per knot");
        let m = values[0].len();
        assert!(values.iter().all(|v| v.len() == m), "ragged values");
        Self { knots, values }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Applies `g` to every piece value.
    pub fn map<G: Fn(&[f64]) -> Vec<f64>>(&self, g: G) -> Self {
        Self {
            knots: self.knots.clone(),
            values: self.values.iter().map(|v| g(v)).collect(),
        }
    }
}

impl TimeField for PiecewiseConstant {
    fn sites(&self) -> usize {
        self.values[0].len()
    }

    fn eval_into(&self, t: f64, side: Side, out: &mut [f64]) {
        out.copy_from_slice(&self.values[piece(&self.knots, t, side)]);
    }

    fn breakpoints(&self) -> &[f64] {
        &self.knots[1..]
    }
}

/// Càdlàg path that is affine between knots:
/// `x(t) = values[k] + slopes[k] (t - knots[k])` on `[knots[k], knots[k+1])`.
///
/// The jump at knot `k ≥ 1` is `values[k]` minus the left limit there.
#[derive(Debug, Clone, PartialEq)]
pub struct CadlagPath {
    knots: Vec<f64>,
    values: Vec<Vec<f64>>,
    slopes: Vec<Vec<f64>>,
}

impl CadlagPath {
    pub fn new(knots: Vec<f64>, values: Vec<Vec<f64>>, slopes: Vec<Vec<f64>>) -> Self {
        check_knots(&knots);
        assert_eq!(knots.len(), values.len(), "one value per knot");
        assert_eq!(knots.len(), slopes.len(), "one slope per knot");
        let m = values[0].len();
        assert!(
            values.iter().chain(&slopes).all(|v| v.len() == m),
            "ragged values"
        );
        Self { knots, values, slopes }
    }

    /// Piecewise-constant path starting at `x0` at time 0 with the given
    /// increments at strictly increasing positive times.
    pub fn from_jumps(x0: Vec<f64>, times: &[f64], increments: &[Vec<f64>]) -> Self {
        assert_eq!(times.len(), increments.len());
        let m = x0.len();
        let mut knots = vec![0.0];
        let mut values = vec![x0];
        for (&t, h) in times.iter().zip(increments) {
            let next: Vec<f64> = values.last().unwrap().iter().zip(h).map(|(a, b)| a + b).collect();
            knots.push(t);
            values.push(next);
        }
        let slopes = vec![vec![0.0; m]; knots.len()];
        Self::new(knots, values, slopes)
    }

    /// The zero path on `m` sites.
    pub fn zero(m: usize) -> Self {
        Self::new(vec![0.0], vec![vec![0.0; m]], vec![vec![0.0; m]])
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn initial(&self) -> &[f64] {
        &self.values[0]
    }

    /// Increment at knot `k ≥ 1`.
    pub fn jump(&self, k: usize) -> Vec<f64> {
        let dt = self.knots[k] - self.knots[k - 1];
        self.values[k]
            .iter()
            .zip(&self.values[k - 1])
            .zip(&self.slopes[k - 1])
            .map(|((v, prev), s)| v - (prev + s * dt))
            .collect()
    }

    /// The piecewise-constant time derivative between knots.
    pub fn derivative(&self) -> PiecewiseConstant {
        PiecewiseConstant::new(self.knots.clone(), self.slopes.clone())
    }

    pub fn has_slopes(&self) -> bool {
        self.slopes.iter().any(|s| s.iter().any(|&x| x != 0.0))
    }

    /// Negated copy.
    pub fn neg(&self) -> Self {
        let flip = |vs: &Vec<Vec<f64>>| vs.iter().map(|v| v.iter().map(|x| -x).collect()).collect();
        Self {
            knots: self.knots.clone(),
            values: flip(&self.values),
            slopes: flip(&self.slopes),
        }
    }
}

impl TimeField for CadlagPath {
    fn sites(&self) -> usize {
        self.values[0].len()
    }

    fn eval_into(&self, t: f64, side: Side, out: &mut [f64]) {
        let k = piece(&self.knots, t, side);
        let dt = t - self.knots[k];
        for ((o, v), s) in out.iter_mut().zip(&self.values[k]).zip(&self.slopes[k]) {
            *o = v + s * dt;
        }
    }

    fn breakpoints(&self) -> &[f64] {
        &self.knots[1..]
    }
}
