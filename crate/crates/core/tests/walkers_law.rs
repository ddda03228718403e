use nalgebra::DMatrix;

use sktlab::grid_ops::mean_of;
use sktlab::params::{uniform_schedule, SktParams};
use sktlab::semidiscrete::{integrate, IntegratorConfig, OdeState};
use sktlab::walkers::{simulate_path, CountsState, ReplicaSeed, SimOptions, Simulator, Species};

fn lattice_generator(m: usize, d: f64) -> DMatrix<f64> {
    let h = d * (m * m) as f64;
    DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            -2.0 * h
        } else if (i + 1) % m == j || (j + 1) % m == i {
            h
        } else {
            0.0
        }
    })
}

#[test]
fn single_walker_matches_heat_kernel() {
    let (m, d, t) = (4, 1.0, 0.05);
    let params = SktParams::new(d, d, 0.0, 0.0);
    let state0 = CountsState::from_profiles(&[1.0, 0.0, 0.0, 0.0], &[0.0; 4], 1).unwrap();
    let opts = SimOptions {
        record_integrals: false,
        ..Default::default()
    };
    let replicas = 100_000;
    let mut hist = [0usize; 4];
    for r in 0..replicas {
        let path = simulate_path(&state0, &params, &[0.0, t], ReplicaSeed::new(5, r), &opts).unwrap();
        let end = path.states[1].counts(Species::U);
        hist[end.iter().position(|&c| c == 1).unwrap()] += 1;
    }
    let kernel = (lattice_generator(m, d) * t).exp();
    let tv: f64 = (0..m)
        .map(|j| (hist[j] as f64 / replicas as f64 - kernel[(0, j)]).abs())
        .sum::<f64>()
        / 2.0;
    assert!(tv <= 0.02, "total variation {tv}, histogram {hist:?}");
    // the two neighbours are exchangeable
    let diff = (hist[1] as f64 - hist[3] as f64).abs() / replicas as f64;
    assert!(diff < 0.01, "{hist:?}");
}

#[test]
fn rate_tree_stays_consistent_over_a_million_events() {
    let params = SktParams::new(1.0, 0.7, 0.3, 0.2);
    let state = CountsState::from_fns(
        |x| 1.0 + 0.5 * (6.0 * x).sin(),
        |x| 0.8 + 0.3 * (4.0 * x).cos(),
        16,
        500,
    )
    .unwrap();
    let mut sim = Simulator::new(state, params, ReplicaSeed::new(11, 3).rng());
    for _ in 0..1_000_000 {
        sim.step().unwrap();
    }
    let (worst, drift) = sim.audit();
    assert!(worst <= 1e-9, "channel weight drift {worst}");
    assert!(drift <= 1e-9, "total drift {drift}");
}

#[test]
fn replica_mean_tracks_the_lattice_ode() {
    let params = SktParams::new(1.0, 1.0, 0.2, 0.1);
    let (m, n, t) = (4, 20_000, 0.05);
    let u0 = |x: f64| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * x).cos();
    let v0 = |x: f64| 1.0 + 0.5 * (2.0 * std::f64::consts::PI * x).sin();
    let state0 = CountsState::from_fns(u0, v0, m, n).unwrap();
    let ode0 = OdeState {
        u: state0.u(),
        v: state0.v(),
        time: 0.0,
    };
    let ode = integrate(&ode0, &params, &[0.0, t], &IntegratorConfig::default()).unwrap();
    let target = &ode.snapshots[1];

    let opts = SimOptions {
        record_integrals: false,
        ..Default::default()
    };
    let replicas = 32;
    let finals: Vec<CountsState> = (0..replicas)
        .map(|r| {
            simulate_path(&state0, &params, &[0.0, t], ReplicaSeed::new(8, r), &opts)
                .unwrap()
                .states
                .pop()
                .unwrap()
        })
        .collect();
    for (species, exact) in [(Species::U, &target.u), (Species::V, &target.v)] {
        for j in 0..m {
            let xs: Vec<f64> = finals.iter().map(|s| s.density(species)[j]).collect();
            let mean = xs.iter().sum::<f64>() / replicas as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (replicas - 1) as f64;
            let se = (var / replicas as f64).sqrt();
            assert!(
                (mean - exact[j]).abs() <= 5.0 * se + 1e-3,
                "{species:?} site {j}: {mean} vs {} (se {se})",
                exact[j]
            );
        }
    }
}

#[test]
fn densities_keep_their_mean_along_a_path() {
    let params = SktParams::new(0.5, 1.5, 0.4, 0.1);
    let state0 = CountsState::from_fns(|x| 2.0 * x, |x| 1.0 - x / 2.0, 10, 300).unwrap();
    let path = simulate_path(&state0, &params, &uniform_schedule(0.05, 11), ReplicaSeed::new(1, 1), &SimOptions::default())
        .unwrap();
    let (mu, mv) = (mean_of(&state0.u()), mean_of(&state0.v()));
    for s in &path.states {
        assert_eq!(s.totals(), state0.totals());
        assert!((mean_of(&s.u()) - mu).abs() <= 1e-12);
        assert!((mean_of(&s.v()) - mv).abs() <= 1e-12);
    }
    assert!(path.event_count > 0);
}
