use std::f64::consts::PI;
use std::sync::Arc;

use sktlab::duality_check::{
    solve_kolmogorov, solve_kolmogorov_singular, stability_gap, verify_combined, verify_duality, verify_singular,
    CadlagPath, CombinedInputs, ConstantField, EnvCoefficient, FnField, SolverConfig, TimeField,
};
use sktlab::grid_ops::{laplacian_eigenvalue, nodes, PeriodicLaplacian};
use sktlab::params::{uniform_schedule, SktParams};
use sktlab::semidiscrete::{integrate, IntegratorConfig, OdeState};

fn cosine(m: usize, k: usize, amp: f64) -> Vec<f64> {
    nodes(m).iter().map(|x| amp * (2.0 * PI * k as f64 * x).cos()).collect()
}

fn fine(safety: f64) -> SolverConfig {
    SolverConfig {
        safety,
        ..Default::default()
    }
}

#[test]
fn sup_form_can_fail_while_same_time_form_holds() {
    // constant coefficient, pure eigenmode, long horizon
    let (m, alpha, t) = (16, 1.0, 0.5);
    let env = EnvCoefficient::constant(vec![alpha; m]).unwrap();
    let z0 = cosine(m, 1, 1.0);
    let sol = solve_kolmogorov(&z0, &env, None, None, &uniform_schedule(t, 11), &fine(0.05)).unwrap();
    let rep = verify_duality(&sol, 0.1).unwrap();
    assert_eq!(rep.per_time_pass, Some(true));
    assert!(!rep.stated_pass, "lhs {} rhs {}", rep.lhs(), rep.rhs_total);
    assert!(rep.stated_pass_factor2);

    let lap = PeriodicLaplacian::new(m).unwrap();
    let n0 = lap.neg_sobolev_norm_sq(&z0).unwrap();
    let decay = (-2.0 * alpha * laplacian_eigenvalue(m, 1) * t).exp();
    let expect = n0 + 0.5 * n0 * (1.0 - decay);
    assert!((rep.lhs() - expect).abs() <= 1e-6 * expect, "{} vs {expect}", rep.lhs());
}

#[test]
fn single_jump_ratio_has_a_closed_form_at_every_resolution() {
    let (alpha, t, t0) = (0.7, 0.05, 0.02);
    for m in [4usize, 8, 16, 32, 64] {
        let env = EnvCoefficient::constant(vec![alpha; m]).unwrap();
        let jump = cosine(m, 1, 0.3);
        let xd = CadlagPath::from_jumps(vec![0.0; m], &[t0], &[jump]);
        let sol = solve_kolmogorov_singular(&env, &xd, &uniform_schedule(t, 6), &fine(0.02)).unwrap();
        let rep = verify_singular(&sol).unwrap();
        let lam = laplacian_eigenvalue(m, 1);
        let expect = 1.0 + 0.5 * (1.0 - (-2.0 * alpha * lam * (t - t0)).exp());
        let ratio = rep.ratio.unwrap();
        assert!((ratio - expect).abs() <= 1e-6, "M = {m}: {ratio} vs {expect}");
    }
}

#[test]
fn combined_with_constant_regular_rate() {
    let (m, alpha, t) = (8, 1.3, 0.04);
    let env = EnvCoefficient::constant(vec![alpha; m]).unwrap();
    let c = cosine(m, 2, 2.0);
    let rate = ConstantField(c.clone());
    let zero = CadlagPath::zero(m);
    let z0 = vec![0.0; m];
    let sched = uniform_schedule(t, 5);
    let out = verify_combined(
        &CombinedInputs {
            z0: &z0,
            env: &env,
            f: None,
            xr_prime: Some(&rate),
            xd: &zero,
            schedule: &sched,
        },
        1.0,
        &fine(0.02),
    )
    .unwrap();
    let lam = laplacian_eigenvalue(m, 2);
    for rec in out.solution.scheduled() {
        let g = (1.0 - (-alpha * lam * rec.time).exp()) / (alpha * lam);
        for (z, ci) in rec.z.iter().zip(&c) {
            assert!((z - g * ci).abs() <= 1e-9, "t = {}: {z} vs {}", rec.time, g * ci);
        }
    }
    assert!(out.split_residual <= 1e-12);
    assert_eq!(out.report.ratio, None);
    assert!(out.report.slack >= 0.0);
    assert_eq!(out.regular.per_time_pass, Some(true));
}

fn smooth_problem(m: usize) -> (Vec<f64>, EnvCoefficient, impl TimeField) {
    let xs = nodes(m);
    let mu: Vec<f64> = xs.iter().map(|x| 1.0 + 0.5 * (PI * x).sin().powi(2)).collect();
    let env = EnvCoefficient::constant(mu).unwrap();
    let z0: Vec<f64> = xs.iter().map(|x| (2.0 * PI * x).cos() + 0.3).collect();
    let f = FnField::new(m, move |t: f64, out: &mut [f64]| {
        for (o, x) in out.iter_mut().zip(&xs) {
            *o = (2.0 * PI * x).sin() * (10.0 * t).cos();
        }
    });
    (z0, env, f)
}

#[test]
fn certificate_values_converge_under_refinement() {
    let sched = uniform_schedule(0.05, 6);
    let values: Vec<(f64, f64)> = [8usize, 16, 32, 64]
        .iter()
        .map(|&m| {
            let (z0, env, f) = smooth_problem(m);
            let sol = solve_kolmogorov(&z0, &env, Some(&f), None, &sched, &fine(0.05)).unwrap();
            let rep = verify_duality(&sol, 1.0).unwrap();
            assert_eq!(rep.per_time_pass, Some(true));
            (rep.lhs(), rep.rhs_total)
        })
        .collect();
    for w in values.windows(3) {
        let d1 = (w[1].0 - w[0].0).abs().max((w[1].1 - w[0].1).abs());
        let d2 = (w[2].0 - w[1].0).abs().max((w[2].1 - w[1].1).abs());
        assert!(d2 <= d1 / 2.0, "differences {d1} then {d2}: {values:?}");
    }
}

#[test]
fn solver_self_converges_in_the_step() {
    let m = 16;
    let (z0, _, f) = smooth_problem(m);
    let xs = nodes(m);
    let field = FnField::new(m, move |t: f64, out: &mut [f64]| {
        for (o, x) in out.iter_mut().zip(&xs) {
            *o = 1.0 + 0.5 * (2.0 * PI * (x - t)).sin().powi(2);
        }
    });
    let env = EnvCoefficient::new(Arc::new(field), 1.0, 1.5).unwrap();
    let sched = [0.0, 0.02];
    let finals: Vec<Vec<f64>> = [0.2, 0.1, 0.05, 0.025]
        .iter()
        .map(|&s| {
            let sol = solve_kolmogorov(&z0, &env, Some(&f), None, &sched, &fine(s)).unwrap();
            sol.final_record().z.clone()
        })
        .collect();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()));
    let d: Vec<f64> = finals.windows(2).map(|w| dist(&w[0], &w[1])).collect();
    assert!(d[2] <= 1e-8, "{d:?}");
    assert!(d[0] / d[1] > 8.0 && d[1] / d[2] > 8.0, "{d:?}");
}

#[test]
fn stability_of_identical_data_is_zero() {
    let params = SktParams::new(1.0, 1.0, 0.1, 0.1);
    let m = 16;
    let s0 = OdeState {
        u: cosine(m, 1, 0.2).iter().map(|x| 1.0 + x).collect(),
        v: vec![1.0; m],
        time: 0.0,
    };
    let traj = integrate(&s0, &params, &uniform_schedule(0.05, 11), &IntegratorConfig::default()).unwrap();
    let rep = stability_gap(&traj, &traj, &params).unwrap();
    assert_eq!(rep.lhs, 0.0);
    assert_eq!(rep.bracket, 0.0);
    assert_eq!(rep.ratio, None);
    assert!(rep.certified);
}

#[test]
fn decoupled_stability_has_a_closed_form() {
    let (m, d, eps, t) = (16, 0.5, 1e-2, 0.05);
    let params = SktParams::new(d, d, 0.0, 0.0);
    let sched = uniform_schedule(t, 2001);
    let reference = OdeState {
        u: vec![1.0; m],
        v: vec![1.0; m],
        time: 0.0,
    };
    let bump = cosine(m, 1, eps);
    let perturbed = OdeState {
        u: reference.u.iter().zip(&bump).map(|(a, b)| a + b).collect(),
        ..reference.clone()
    };
    let cfg = IntegratorConfig::default();
    let a = integrate(&reference, &params, &sched, &cfg).unwrap();
    let b = integrate(&perturbed, &params, &sched, &cfg).unwrap();
    let rep = stability_gap(&a, &b, &params).unwrap();

    let lap = PeriodicLaplacian::new(m).unwrap();
    let lam = laplacian_eigenvalue(m, 1);
    let n0 = lap.neg_sobolev_norm_sq(&bump).unwrap();
    let l2 = eps * eps / 2.0;
    let integral = l2 * (1.0 - (-2.0 * d * lam * t).exp()) / (2.0 * d * lam);
    assert!((rep.z_sup - n0).abs() <= 1e-12 * n0);
    assert!((rep.z_integral - integral).abs() <= 1e-6 * integral, "{} vs {integral}", rep.z_integral);
    assert_eq!(rep.w_sup, 0.0);
    assert!((rep.bracket - n0).abs() <= 1e-12 * n0);
}
