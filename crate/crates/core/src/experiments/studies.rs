//! The six studies. Replicas run on the ambient rayon pool and are reduced in
//! replica order, so results do not depend on the thread count.

use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use super::config::{StudyConfig, StudyKind};
use super::gap::{GapDecomposition, Target};
use super::output::{Check, StudyResult, StudyRow};
use super::ExperimentError;
use crate::duality_check::instances::{random_jump_path, RandomInstance};
use crate::duality_check::{
    solve_kolmogorov, solve_kolmogorov_singular, stability_gap, verify_duality, verify_singular, SolverConfig,
};
use crate::grid_ops::{l2_norm_sq, mean_of, PeriodicLaplacian};
use crate::numeric::{fit_loglog, mean_and_stderr};
use crate::params::uniform_schedule;
use crate::reconstruct::trip_norm_discrete;
use crate::semidiscrete::{integrate, IntegratorConfig, OdeState, Trajectory};
use crate::walkers::{
    extract_martingale, predicted_qv, simulate_path, CountsState, ReplicaSeed, SimOptions, Species,
};

/// Runs the configured study on a pool of `threads` workers.
pub fn run_study(config: &StudyConfig, threads: usize) -> Result<StudyResult, ExperimentError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
    pool.install(|| match config.study {
        StudyKind::GapVsN => run_gap_vs_n(config),
        StudyKind::DetOrder => run_deterministic_order(config),
        StudyKind::Rough => run_rough_estimate(config),
        StudyKind::Qv => run_qv_study(config),
        StudyKind::Duality => run_duality_suite(config),
        StudyKind::Stability => run_stability(config),
    })
}

/// Stream seed of one `(M, N)` cell.
fn cell_seed(seed: u64, m: usize, n: u64) -> u64 {
    let mut z = seed ^ (m as u64).rotate_left(32) ^ n.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Clock {
    start: Instant,
    enabled: bool,
}

impl Clock {
    fn start(cfg: &StudyConfig) -> Self {
        Self {
            start: Instant::now(),
            enabled: cfg.record_timing,
        }
    }

    fn seconds(&self) -> f64 {
        if self.enabled {
            self.start.elapsed().as_secs_f64()
        } else {
            0.0
        }
    }
}

fn nodal(m: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
    (1..=m).map(|j| f(j as f64 / m as f64)).collect()
}

/// `(c1 + A cos 2πx, c2 + A sin 2πx)` at the nodes.
fn smooth_profiles(cfg: &StudyConfig, m: usize) -> (Vec<f64>, Vec<f64>) {
    let [c1, c2] = cfg.base;
    let a = cfg.amplitude;
    (
        nodal(m, |x| c1 + a * (2.0 * PI * x).cos()),
        nodal(m, |x| c2 + a * (2.0 * PI * x).sin()),
    )
}

fn row(cfg: &StudyConfig, m: usize, n: u64, r: usize, seed: u64) -> StudyRow {
    StudyRow {
        study: cfg.study,
        m,
        n,
        r,
        t: cfg.t_final,
        seed,
        mean_sq_gap: 0.0,
        stderr: 0.0,
        slope: None,
        slope_err: None,
        runtime_s: 0.0,
        extra: json!({}),
    }
}

/// Fits `mean_sq_gap` against `x` over `rows`, stores the slope on every row
/// and returns it.
fn fit_rows(rows: &mut [StudyRow], x: impl Fn(&StudyRow) -> f64) -> Option<(f64, Option<f64>)> {
    let xs: Vec<f64> = rows.iter().map(&x).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mean_sq_gap).collect();
    let es: Vec<f64> = rows.iter().map(|r| r.stderr).collect();
    let fit = fit_loglog(&xs, &ys, Some(&es))?;
    let err = fit.slope_err.filter(|e| *e > 0.0).or(fit.residual_err);
    for r in rows.iter_mut() {
        r.slope = Some(fit.slope);
        r.slope_err = err;
    }
    Some((fit.slope, err))
}

fn result(cfg: &StudyConfig, mut rows: Vec<StudyRow>, slope: Option<(f64, Option<f64>)>, checks: Vec<Check>) -> StudyResult {
    // margin of the initial profiles unless the study recorded a sharper one
    let sup = |c: f64| c + cfg.amplitude;
    let margin = cfg.params.smallness_margin(sup(cfg.base[0]), sup(cfg.base[1]));
    for r in &mut rows {
        if let Some(extra) = r.extra.as_object_mut() {
            extra.entry("smallness_margin").or_insert(json!(margin));
            if r.n > 0 && r.m > 0 {
                extra.entry("scale_ratio").or_insert(json!(r.n as f64 / (r.m * r.m) as f64));
            }
        }
    }
    StudyResult {
        study: cfg.study,
        seed: cfg.seed,
        config: cfg.clone(),
        rows,
        slope: slope.map(|s| s.0),
        slope_err: slope.and_then(|s| s.1),
        checks,
    }
}

fn gap_path(v: &[Vec<f64>], w: &[Vec<f64>]) -> Vec<Vec<f64>> {
    v.iter()
        .zip(w)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
        .collect()
}

/// `E[|||Z|||² + |||W|||²]` against `N` for a constant target.
pub fn run_gap_vs_n(cfg: &StudyConfig) -> Result<StudyResult, ExperimentError> {
    let p = cfg.params;
    let [c1, c2] = cfg.base;
    let margin = p.smallness_margin(c1, c2);
    if !(margin > 0.0) {
        return Err(ExperimentError::Smallness { margin });
    }
    let schedule = uniform_schedule(cfg.t_final, cfg.snapshots);
    let opts = SimOptions {
        record_integrals: false,
        ..Default::default()
    };
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut study_slope = None;
    for &m in &cfg.m_grid {
        let lap = PeriodicLaplacian::new(m)?;
        let mut m_rows = Vec::new();
        for &n in &cfg.n_grid {
            let clock = Clock::start(cfg);
            let seed = cell_seed(cfg.seed, m, n);
            let state0 = CountsState::from_profiles(&vec![c1; m], &vec![c2; m], n)?;
            let hat_u = vec![mean_of(&state0.u()); m];
            let hat_v = vec![mean_of(&state0.v()); m];
            let samples = (0..cfg.replicas)
                .into_par_iter()
                .map(|r| -> Result<_, ExperimentError> {
                    let path = simulate_path(&state0, &p, &schedule, ReplicaSeed::new(seed, r as u64), &opts)?;
                    let us: Vec<Vec<f64>> = path.states.iter().map(|s| s.u()).collect();
                    let vs: Vec<Vec<f64>> = path.states.iter().map(|s| s.v()).collect();
                    let z = gap_path(&vec![hat_u.clone(); us.len()], &us);
                    let w = gap_path(&vec![hat_v.clone(); vs.len()], &vs);
                    let tz = trip_norm_discrete(&lap, &schedule, &z)?;
                    let tw = trip_norm_discrete(&lap, &schedule, &w)?;
                    let mass_exact = path.states.iter().all(|s| s.totals() == state0.totals());
                    Ok((
                        tz.squared() + tw.squared(),
                        tz.sup_part + tw.sup_part,
                        tz.integral_part + tw.integral_part,
                        path.event_count as f64,
                        mass_exact,
                    ))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let vals: Vec<f64> = samples.iter().map(|s| s.0).collect();
            let (mean, se) = mean_and_stderr(&vals);
            let avg = |k: fn(&(f64, f64, f64, f64, bool)) -> f64| samples.iter().map(k).sum::<f64>() / samples.len() as f64;
            let scale_ratio = n as f64 / (m * m) as f64;
            let mut r = row(cfg, m, n, cfg.replicas, seed);
            r.mean_sq_gap = mean;
            r.stderr = se;
            r.extra = json!({
                "smallness_margin": margin,
                "scale_ratio": scale_ratio,
                "below_scale_floor": scale_ratio < cfg.scale_floor,
                "sup_part": avg(|s| s.1),
                "integral_part": avg(|s| s.2),
                "events_mean": avg(|s| s.3),
                "mass_exact": samples.iter().all(|s| s.4),
            });
            r.runtime_s = clock.seconds();
            m_rows.push(r);
        }
        checks.push(Check::new(
            format!("mass_exact_M{m}"),
            m_rows.iter().all(|r| r.extra["mass_exact"] == json!(true)),
            0.0,
            "integer populations conserved at every snapshot",
        ));
        if let Some((slope, err)) = fit_rows(&mut m_rows, |r| r.n as f64) {
            checks.push(Check::new(
                format!("slope_M{m}"),
                (slope + 1.0).abs() <= 0.2,
                slope,
                format!("fitted slope vs N, expected -1.0 ± 0.2 (se {:?})", err),
            ));
            study_slope.get_or_insert((slope, err));
        }
        rows.extend(m_rows);
    }
    Ok(result(cfg, rows, study_slope, checks))
}

fn solve_semi(u0: Vec<f64>, v0: Vec<f64>, cfg: &StudyConfig, schedule: &[f64]) -> Result<Trajectory, ExperimentError> {
    Ok(integrate(
        &OdeState { u: u0, v: v0, time: 0.0 },
        &cfg.params,
        schedule,
        &IntegratorConfig::default(),
    )?)
}

/// Restriction of a fine-grid path to the nodes of an `m`-site grid.
fn restrict(path: &Trajectory, m: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let fine = path.snapshots[0].u.len();
    let stride = fine / m;
    let pick = |x: &[f64]| -> Vec<f64> { (1..=m).map(|j| x[j * stride - 1]).collect() };
    (
        path.snapshots.iter().map(|s| pick(&s.u)).collect(),
        path.snapshots.iter().map(|s| pick(&s.v)).collect(),
    )
}

/// Squared trip norm of `coarse − reference` and the largest final nodal error.
fn deterministic_gap(
    coarse: &Trajectory,
    reference: &Trajectory,
    schedule: &[f64],
) -> Result<(f64, f64), ExperimentError> {
    let m = coarse.snapshots[0].u.len();
    let lap = PeriodicLaplacian::new(m)?;
    let (ru, rv) = restrict(reference, m);
    let cu: Vec<Vec<f64>> = coarse.snapshots.iter().map(|s| s.u.clone()).collect();
    let cv: Vec<Vec<f64>> = coarse.snapshots.iter().map(|s| s.v.clone()).collect();
    let z = gap_path(&cu, &ru);
    let w = gap_path(&cv, &rv);
    let sq = trip_norm_discrete(&lap, schedule, &z)?.squared() + trip_norm_discrete(&lap, schedule, &w)?.squared();
    let last = z.len() - 1;
    let nodal = z[last].iter().chain(&w[last]).fold(0.0f64, |a, x| a.max(x.abs()));
    Ok((sq, nodal))
}

/// Deterministic squared trip-norm gap between the `M`-site solution and a
/// fine reference, against `M`.
pub fn run_deterministic_order(cfg: &StudyConfig) -> Result<StudyResult, ExperimentError> {
    let schedule = uniform_schedule(cfg.t_final, cfg.snapshots);
    let (u_ref, v_ref) = smooth_profiles(cfg, cfg.m_ref);
    let (u_half, v_half) = smooth_profiles(cfg, cfg.m_ref / 2);
    let (reference, half) = rayon::join(
        || solve_semi(u_ref, v_ref, cfg, &schedule),
        || solve_semi(u_half, v_half, cfg, &schedule),
    );
    let (reference, half) = (reference?, half?);
    let mut rows = cfg
        .m_grid
        .par_iter()
        .map(|&m| -> Result<StudyRow, ExperimentError> {
            let clock = Clock::start(cfg);
            let (u0, v0) = smooth_profiles(cfg, m);
            let coarse = solve_semi(u0, v0, cfg, &schedule)?;
            let (gap, nodal_err) = deterministic_gap(&coarse, &reference, &schedule)?;
            let half_gap = if (cfg.m_ref / 2) % m == 0 {
                Some(deterministic_gap(&coarse, &half, &schedule)?.0)
            } else {
                None
            };
            let mut r = row(cfg, m, 0, 1, cfg.seed);
            r.mean_sq_gap = gap;
            r.extra = json!({
                "m_ref": cfg.m_ref,
                "nodal_max_err": nodal_err,
                "half_ref_gap": half_gap,
                "ref_change": half_gap.map(|h| if gap > 0.0 { (gap - h).abs() / gap } else { 0.0 }),
                "smallness_margin": cfg.params.smallness_margin(
                    cfg.base[0] + cfg.amplitude, cfg.base[1] + cfg.amplitude),
            });
            r.runtime_s = clock.seconds();
            Ok(r)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let worst = rows
        .iter()
        .filter_map(|r| r.extra["ref_change"].as_f64())
        .fold(0.0f64, f64::max);
    if worst > 0.05 {
        return Err(ExperimentError::Unresolved(format!(
            "halving m_ref = {} moves a gap by {:.1}%",
            cfg.m_ref,
            100.0 * worst
        )));
    }
    let mut checks = vec![Check::new(
        "reference_resolved",
        true,
        worst,
        "largest relative gap change against the half-resolution reference",
    )];
    let nodal_fit = fit_loglog(
        &rows.iter().map(|r| r.m as f64).collect::<Vec<_>>(),
        &rows
            .iter()
            .map(|r| r.extra["nodal_max_err"].as_f64().unwrap_or(0.0))
            .collect::<Vec<_>>(),
        None,
    );
    let slope = fit_rows(&mut rows, |r| r.m as f64);
    if let Some((s, _)) = slope {
        checks.push(Check::new(
            "slope",
            (s + 4.0).abs() <= 0.4,
            s,
            "squared trip-norm gap vs M, expected -4 ± 0.4",
        ));
    }
    if let Some(f) = nodal_fit {
        checks.push(Check::new(
            "nodal_slope",
            (f.slope + 2.0).abs() <= 0.2,
            f.slope,
            "final-time nodal error vs M, expected -2 ± 0.2",
        ));
    }
    Ok(result(cfg, rows, slope, checks))
}

/// `E[sup_t ‖U − u‖² + sup_t ‖V − v‖²]` against `N` at fixed small `M`.
pub fn run_rough_estimate(cfg: &StudyConfig) -> Result<StudyResult, ExperimentError> {
    let p = cfg.params;
    let schedule = uniform_schedule(cfg.t_final, cfg.snapshots);
    let opts = SimOptions {
        record_integrals: false,
        ..Default::default()
    };
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut study_slope = None;
    for &m in &cfg.m_grid {
        let (u0, v0) = smooth_profiles(cfg, m);
        let mut m_rows = Vec::new();
        for &n in &cfg.n_grid {
            let clock = Clock::start(cfg);
            let seed = cell_seed(cfg.seed, m, n);
            let state0 = CountsState::from_profiles(&u0, &v0, n)?;
            let semi = solve_semi(state0.u(), state0.v(), cfg, &schedule)?;
            let samples = (0..cfg.replicas)
                .into_par_iter()
                .map(|r| -> Result<f64, ExperimentError> {
                    let path = simulate_path(&state0, &p, &schedule, ReplicaSeed::new(seed, r as u64), &opts)?;
                    let mut su = 0.0f64;
                    let mut sv = 0.0f64;
                    for (s, d) in path.states.iter().zip(&semi.snapshots) {
                        let du: Vec<f64> = s.u().iter().zip(&d.u).map(|(a, b)| a - b).collect();
                        let dv: Vec<f64> = s.v().iter().zip(&d.v).map(|(a, b)| a - b).collect();
                        su = su.max(l2_norm_sq(&du));
                        sv = sv.max(l2_norm_sq(&dv));
                    }
                    Ok(su + sv)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let (mean, se) = mean_and_stderr(&samples);
            let mut r = row(cfg, m, n, cfg.replicas, seed);
            r.mean_sq_gap = mean;
            r.stderr = se;
            r.extra = json!({
                "scale_ratio": n as f64 / (m * m) as f64,
                "semi_negativity_warnings": semi.negativity_warnings,
            });
            r.runtime_s = clock.seconds();
            m_rows.push(r);
        }
        let decreasing = m_rows.windows(2).all(|w| w[1].mean_sq_gap < w[0].mean_sq_gap);
        checks.push(Check::new(
            format!("decreasing_M{m}"),
            decreasing,
            0.0,
            "means strictly decrease in N",
        ));
        if let Some((slope, err)) = fit_rows(&mut m_rows, |r| r.n as f64) {
            checks.push(Check::new(
                format!("slope_M{m}"),
                slope <= -0.5,
                slope,
                "fitted slope vs N, expected at most -0.5",
            ));
            study_slope.get_or_insert((slope, err));
        }
        rows.extend(m_rows);
    }
    Ok(result(cfg, rows, study_slope, checks))
}

fn z_score(mean: f64, se: f64) -> f64 {
    if se > 0.0 {
        mean / se
    } else if mean == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Per-site comparison of `E[ℳ_i(T)²]` with `E[⟨ℳ_i⟩(T)]`.
pub fn run_qv_study(cfg: &StudyConfig) -> Result<StudyResult, ExperimentError> {
    let p = cfg.params;
    let schedule = uniform_schedule(cfg.t_final, cfg.snapshots);
    let opts = SimOptions::default();
    let mut rows = Vec::new();
    let mut within = 0usize;
    let mut total = 0usize;
    let mut worst_mean_z = 0.0f64;
    let mut worst_mass = 0.0f64;
    for &m in &cfg.m_grid {
        let (u0, v0) = smooth_profiles(cfg, m);
        for &n in &cfg.n_grid {
            let clock = Clock::start(cfg);
            let seed = cell_seed(cfg.seed, m, n);
            let state0 = CountsState::from_profiles(&u0, &v0, n)?;
            let samples = (0..cfg.replicas)
                .into_par_iter()
                .map(|r| -> Result<_, ExperimentError> {
                    let path = simulate_path(&state0, &p, &schedule, ReplicaSeed::new(seed, r as u64), &opts)?;
                    let mart = extract_martingale(&path)?;
                    let qv = predicted_qv(&path)?;
                    let mass = mart
                        .iter()
                        .flat_map(|s| [mean_of(&s.u).abs(), mean_of(&s.v).abs()])
                        .fold(0.0f64, f64::max);
                    Ok((mart.last().cloned().expect("nonempty"), qv.last().cloned().expect("nonempty"), mass))
                })
                .collect::<Result<Vec<_>, _>>()?;
            worst_mass = samples.iter().map(|s| s.2).fold(worst_mass, f64::max);
            let elapsed = clock.seconds();
            for species in [Species::U, Species::V] {
                for i in 0..m {
                    let pick = |x: &crate::walkers::SpeciesPair| match species {
                        Species::U => x.u[i],
                        Species::V => x.v[i],
                    };
                    let mvals: Vec<f64> = samples.iter().map(|s| pick(&s.0)).collect();
                    let sq: Vec<f64> = mvals.iter().map(|x| x * x).collect();
                    let qv: Vec<f64> = samples.iter().map(|s| pick(&s.1)).collect();
                    let diff: Vec<f64> = sq.iter().zip(&qv).map(|(a, b)| a - b).collect();
                    let (mean_m, se_m) = mean_and_stderr(&mvals);
                    let (mean_sq, se_sq) = mean_and_stderr(&sq);
                    let (mean_qv, _) = mean_and_stderr(&qv);
                    let (mean_d, se_d) = mean_and_stderr(&diff);
                    let qz = z_score(mean_d, se_d);
                    let mz = z_score(mean_m, se_m);
                    total += 1;
                    if qz.abs() <= 3.0 {
                        within += 1;
                    }
                    worst_mean_z = worst_mean_z.max(mz.abs());
                    let mut r = row(cfg, m, n, cfg.replicas, seed);
                    r.mean_sq_gap = mean_sq;
                    r.stderr = se_sq;
                    r.runtime_s = elapsed;
                    r.extra = json!({
                        "species": match species { Species::U => "u", Species::V => "v" },
                        "site": i,
                        "predicted_qv": mean_qv,
                        "qv_z": qz,
                        "mean": mean_m,
                        "mean_z": mz,
                    });
                    rows.push(r);
                }
            }
        }
    }
    let frac = if total > 0 { within as f64 / total as f64 } else { 1.0 };
    let checks = vec![
        Check::new("qv_band", frac >= 0.95, frac, "fraction of sites with |z| <= 3, expected >= 0.95"),
        Check::new("mean_band", worst_mean_z <= 4.0, worst_mean_z, "largest |mean z-score|, expected <= 4"),
        Check::new("martingale_mass", worst_mass <= 1e-12, worst_mass, "largest |[M(t)]|, expected <= 1e-12"),
    ];
    Ok(result(cfg, rows, None, checks))
}

/// Seeds of the duality suite instances.
fn instance_seed(seed: u64, kind: u64, i: usize) -> u64 {
    cell_seed(seed ^ kind.wrapping_mul(0xA24B_AED4_963E_E407), i, kind)
}

/// Randomized regular, singular and stochastic combined certificates.
pub fn run_duality_suite(cfg: &StudyConfig) -> Result<StudyResult, ExperimentError> {
    let schedule = uniform_schedule(cfg.t_final, cfg.snapshots);
    let solver = SolverConfig::default();
    let pick_m = |i: usize| cfg.m_grid[i % cfg.m_grid.len()];

    let regular = (0..cfg.regular_instances)
        .into_par_iter()
        .map(|i| -> Result<StudyRow, ExperimentError> {
            let clock = Clock::start(cfg);
            let seed = instance_seed(cfg.seed, 1, i);
            let inst = RandomInstance::generate(seed, pick_m(i), cfg.t_final);
            let env = inst.env()?;
            let (f, r) = (inst.f_field(), inst.r_field());
            let sol = solve_kolmogorov(&inst.z0, &env, Some(&f), Some(&r), &schedule, &solver)?;
            let reports = cfg
                .tradeoffs
                .iter()
                .map(|&a| verify_duality(&sol, a))
                .collect::<Result<Vec<_>, _>>()?;
            let mut row = row(cfg, inst.m, 0, 1, seed);
            row.mean_sq_gap = reports[0].lhs();
            row.extra = json!({
                "kind": "regular",
                "mean_defect": sol.mean_defect,
                "reports": reports,
            });
            row.runtime_s = clock.seconds();
            Ok(row)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let singular = (0..cfg.singular_instances)
        .into_par_iter()
        .map(|i| -> Result<StudyRow, ExperimentError> {
            let clock = Clock::start(cfg);
            let seed = instance_seed(cfg.seed, 2, i);
            let m = pick_m(i);
            let env = RandomInstance::generate(seed, m, cfg.t_final).env()?;
            let xd = random_jump_path(seed, m, 10, cfg.t_final, 1.0);
            let coarse = verify_singular(&solve_kolmogorov_singular(&env, &xd, &schedule, &solver)?)?;
            let fine_cfg = SolverConfig {
                safety: solver.safety / 2.0,
                ..solver
            };
            let fine = verify_singular(&solve_kolmogorov_singular(&env, &xd, &schedule, &fine_cfg)?)?;
            let (a, b) = (coarse.ratio.unwrap_or(0.0), fine.ratio.unwrap_or(0.0));
            let change = if b > 0.0 { (a - b).abs() / b } else { 0.0 };
            let mut row = row(cfg, m, 0, 1, seed);
            row.mean_sq_gap = a;
            row.extra = json!({
                "kind": "singular",
                "ratio_half_step": b,
                "refinement_change": change,
                "report": coarse,
            });
            row.runtime_s = clock.seconds();
            Ok(row)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let combined = (0..cfg.combined_instances)
        .into_par_iter()
        .map(|i| -> Result<StudyRow, ExperimentError> {
            let clock = Clock::start(cfg);
            let seed = instance_seed(cfg.seed, 3, i);
            let m = if i % 2 == 0 { 4 } else { 8 };
            let n = if cfg.n_grid.is_empty() { 100 } else { cfg.n_grid[i % cfg.n_grid.len()] };
            let [c1, c2] = cfg.base;
            let smooth = i >= cfg.combined_instances / 2;
            let p = cfg.params;
            let (u0, v0) = if smooth {
                let kappa = 4.0 * PI * PI * p.mu1(c2);
                Target::Modes { u: c1, v: c2, eps: cfg.amplitude, kappa }.eval(m, 0.0)
            } else {
                (vec![c1; m], vec![c2; m])
            };
            let state0 = CountsState::from_profiles(&u0, &v0, n)?;
            let target = if smooth {
                Target::Modes {
                    u: c1,
                    v: c2,
                    eps: cfg.amplitude,
                    kappa: 4.0 * PI * PI * p.mu1(c2),
                }
            } else {
                Target::Constant {
                    u: mean_of(&state0.u()),
                    v: mean_of(&state0.v()),
                }
            };
            let opts = SimOptions {
                record_integrals: false,
                record_events: true,
                ..Default::default()
            };
            let path = simulate_path(&state0, &p, &schedule, ReplicaSeed::new(seed, 0), &opts)?;
            let gap = GapDecomposition::new(&state0, &path, target)?;
            let exact_cfg = SolverConfig {
                safety: 0.02,
                ..Default::default()
            };
            let a = 1.0;
            let zc = gap.certify(Species::U, a, &exact_cfg)?;
            let wc = gap.certify(Species::V, a, &exact_cfg)?;
            let mut row = row(cfg, m, n, 1, seed);
            row.mean_sq_gap = zc.outcome.report.lhs() + wc.outcome.report.lhs();
            row.extra = json!({
                "kind": "combined",
                "target": target,
                "events": path.event_count,
                "exactness": zc.exactness.max(wc.exactness),
                "split_residual": zc.outcome.split_residual.max(wc.outcome.split_residual),
                "report_z": zc.outcome.report,
                "report_w": wc.outcome.report,
            });
            row.runtime_s = clock.seconds();
            Ok(row)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let all_reports = |key: &'static str| -> Vec<bool> {
        regular
            .iter()
            .flat_map(|r| r.extra["reports"].as_array().cloned().unwrap_or_default())
            .map(|rep| rep[key] == json!(true))
            .collect()
    };
    let count = |v: &[bool]| v.iter().filter(|&&b| b).count();
    let per_time = all_reports("per_time_pass");
    let factor2 = all_reports("stated_pass_factor2");
    let stated = all_reports("stated_pass");
    let max_ratio = singular.iter().map(|r| r.mean_sq_gap).fold(0.0f64, f64::max);
    let max_change = singular
        .iter()
        .filter_map(|r| r.extra["refinement_change"].as_f64())
        .fold(0.0f64, f64::max);
    let max_defect = regular
        .iter()
        .filter_map(|r| r.extra["mean_defect"].as_f64())
        .fold(0.0f64, f64::max);
    let comb_exact = combined
        .iter()
        .filter_map(|r| r.extra["exactness"].as_f64())
        .fold(0.0f64, f64::max);
    let comb_pass = combined
        .iter()
        .flat_map(|r| [&r.extra["report_z"], &r.extra["report_w"]])
        .filter(|rep| rep["stated_pass"] == json!(true))
        .count();

    let checks = vec![
        Check::new(
            "per_time",
            count(&per_time) == per_time.len(),
            count(&per_time) as f64,
            format!("{} of {} same-time certificates pass", count(&per_time), per_time.len()),
        ),
        Check::new(
            "stated_factor2",
            count(&factor2) == factor2.len(),
            count(&factor2) as f64,
            format!(
                "{} of {} sup-form certificates pass with factor 2 ({} without)",
                count(&factor2),
                factor2.len(),
                count(&stated)
            ),
        ),
        Check::new(
            "mean_identity",
            max_defect <= 1e-10,
            max_defect,
            "largest mean-evolution defect, expected <= 1e-10",
        ),
        Check::new(
            "singular_bounded",
            max_ratio.is_finite(),
            max_ratio,
            "largest response-to-forcing ratio",
        ),
        Check::new(
            "singular_refinement",
            max_change <= 0.05,
            max_change,
            "largest ratio change under step halving, expected <= 5%",
        ),
        Check::new(
            "gap_exactness",
            comb_exact <= 1e-8,
            comb_exact,
            "largest deviation of the solved gap from the observed gap, expected <= 1e-8",
        ),
        // Reported only: the singular constant is taken as 1.
        Check::new(
            "combined_unit_constant",
            true,
            comb_pass as f64,
            format!("{} of {} combined certificates hold with unit constant", comb_pass, 2 * combined.len()),
        ),
    ];
    let mut rows = regular;
    rows.extend(singular);
    rows.extend(combined);
    Ok(result(cfg, rows, None, checks))
}

/// Trip-norm response of the semi-discrete system to eigenmode
/// perturbations of a constant state, across `ε` and `M`.
pub fn run_stability(cfg: &StudyConfig) -> Result<StudyResult, ExperimentError> {
    let p = cfg.params;
    let [c1, c2] = cfg.base;
    let schedule = uniform_schedule(cfg.t_final, cfg.snapshots);
    let cells: Vec<(usize, f64)> = cfg
        .m_grid
        .iter()
        .flat_map(|&m| cfg.epsilons.iter().map(move |&e| (m, e)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(m, eps)| -> Result<StudyRow, ExperimentError> {
            let clock = Clock::start(cfg);
            let reference = solve_semi(vec![c1; m], vec![c2; m], cfg, &schedule)?;
            let perturbed = solve_semi(
                nodal(m, |x| c1 + eps * (2.0 * PI * x).cos()),
                nodal(m, |x| c2 + eps * (2.0 * PI * x).sin()),
                cfg,
                &schedule,
            )?;
            let rep = stability_gap(&reference, &perturbed, &p)?;
            let threshold = p.smallness_threshold();
            let product = (c1 + eps) * (c2 + eps);
            let mut row = row(cfg, m, 0, 1, cfg.seed);
            row.mean_sq_gap = rep.lhs;
            row.extra = json!({
                "epsilon": eps,
                "ratio": rep.ratio,
                "bracket": rep.bracket,
                "smallness_margin": rep.smallness_margin,
                "smallness_factor": threshold / product,
                "certified": rep.certified,
            });
            row.runtime_s = clock.seconds();
            Ok(row)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.extra["ratio"].as_f64()).collect();
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = if ratios.is_empty() { f64::NAN } else { hi / lo };
    let factor = rows
        .iter()
        .filter_map(|r| r.extra["smallness_factor"].as_f64())
        .fold(f64::INFINITY, f64::min);
    let checks = vec![
        Check::new(
            "ratio_spread",
            ratios.len() == rows.len() && spread <= 2.0,
            spread,
            "max/min gap-to-data ratio across epsilon and M, expected <= 2",
        ),
        Check::new(
            "smallness_margin",
            factor >= 10.0,
            factor,
            "threshold over sup product, expected >= 10",
        ),
        Check::new(
            "certified",
            rows.iter().all(|r| r.extra["certified"] == json!(true)),
            0.0,
            "smallness holds along both solutions",
        ),
    ];
    Ok(result(cfg, rows, None, checks))
}
