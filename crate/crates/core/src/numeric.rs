//! Small numerical helpers shared by the grid, path and study code.

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator of floats.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Composite trapezoidal rule on a (possibly nonuniform) grid.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    assert_eq!(times.len(), values.len(), "trapezoid needs one value per time");
    compensated_sum(
        times
            .windows(2)
            .zip(values.windows(2))
            .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])),
    )
}

/// Running trapezoidal integral, `out[k] = ∫_{t_0}^{t_k}`.
pub fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    assert_eq!(times.len(), values.len(), "trapezoid needs one value per time");
    let mut acc = CompensatedSum::new();
    let mut out = Vec::with_capacity(times.len());
    if !times.is_empty() {
        out.push(0.0);
    }
    for k in 1..times.len() {
        acc.add(0.5 * (times[k] - times[k - 1]) * (values[k] + values[k - 1]));
        out.push(acc.value());
    }
    out
}

/// Ordinary least-squares fit of `ln y = intercept + slope * ln x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope propagated from the per-point standard
    /// errors of `y` (delta method on `ln y`). `None` when no point errors
    /// were supplied.
    pub slope_err: Option<f64>,
    /// Residual-based standard error (needs at least three points).
    pub residual_err: Option<f64>,
}

/// Fits a straight line through `(ln x_i, ln y_i)`.
///
/// Returns `None` when fewer than two points are given or any coordinate is
/// non-positive.
pub fn fit_loglog(x: &[f64], y: &[f64], y_err: Option<&[f64]>) -> Option<LogLogFit> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    if x.iter().chain(y).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = compensated_sum(lx.iter().copied()) / n;
    let my = compensated_sum(ly.iter().copied()) / n;
    let sxx = compensated_sum(lx.iter().map(|v| (v - mx) * (v - mx)));
    if sxx <= 0.0 {
        return None;
    }
    let sxy = compensated_sum(lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;

    let slope_err = y_err.map(|errs| {
        compensated_sum(lx.iter().zip(y).zip(errs).map(|((l, yv), e)| {
            let w = (l - mx) / sxx;
            let rel = e / yv;
            w * w * rel * rel
        }))
        .sqrt()
    });
    let residual_err = if lx.len() > 2 {
        let ssr = compensated_sum(
            lx.iter()
                .zip(&ly)
                .map(|(a, b)| (b - intercept - slope * a).powi(2)),
        );
        Some((ssr / (n - 2.0) / sxx).sqrt())
    } else {
        None
    };
    Some(LogLogFit {
        slope,
        intercept,
        slope_err,
        residual_err,
    })
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = compensated_sum(samples.iter().copied()) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = compensated_sum(samples.iter().map(|x| (x - mean) * (x - mean))) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Unbiased sample variance.
pub fn sample_variance(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 0.0;
    }
    let mean = compensated_sum(samples.iter().copied()) / n as f64;
    compensated_sum(samples.iter().map(|x| (x - mean) * (x - mean))) / (n - 1) as f64
}
