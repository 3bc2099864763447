use std::f64::consts::FRAC_PI_2;

use cutlab::phase::{
    decaying_solution, distance_to_limit_set, integrate_phase, integrate_phase_backward, remainder_validation,
    PhaseSystem,
};
use cutlab::spectrum::{solve_eigensystem, Grid};
use cutlab::wkb::build_series;
use cutlab::Potential;
use proptest::prelude::*;

fn eigen_system(gamma: f64, k: usize) -> (Potential, f64, PhaseSystem) {
    let p = Potential::new(gamma).unwrap();
    let es = solve_eigensystem(&p, &Grid::default_for(&p, k).unwrap(), k).unwrap();
    let lambda = es.eigenvalue(k);
    (p, lambda, PhaseSystem::eigen_equation(&p, lambda).unwrap())
}

#[test]
fn barriers_collapse_without_forcing() {
    let sys = PhaseSystem::new(|t: f64| t.sqrt(), |_| 0.0, 2.0).unwrap();
    for t in [2.0, 10.0, 1e3] {
        assert_eq!(sys.barriers(t, 1e4).unwrap(), (0.0, 0.0));
    }
}

#[test]
fn upper_barrier_follows_forcing_over_drift() {
    let (_, lambda, sys) = eigen_system(0.5, 1);
    let t = 1e6;
    let (_, u) = sys.barriers(t, 1e7).unwrap();
    assert!((u / (lambda / t.sqrt()).atan() - 1.0).abs() < 1e-5);
}

#[test]
fn negative_discriminant_is_rejected() {
    let sys = PhaseSystem::new(|_| 1.0, |_| 1.0, 0.0).unwrap();
    assert!(sys.barriers(1.0, 10.0).is_err());
    assert!(sys.roots(1.0).is_err());
}

#[test]
fn trap_property() {
    let (_, _, sys) = eigen_system(0.5, 1);
    let t0 = sys.t_start() + 0.5;
    let horizon = 2000.0;
    let (l0, u0) = sys.barriers(t0, horizon).unwrap();
    // Same equation, started past the turning point.
    let lambda = sys.forcing(t0);
    let shifted = PhaseSystem::new(|t: f64| t.sqrt(), move |_| lambda, t0).unwrap();
    let above = integrate_phase(&shifted, u0 + 0.05, horizon, 1e-3).unwrap();
    let below = integrate_phase(&shifted, l0 - 0.05, horizon, 1e-3).unwrap();
    let stride = above.times.len() / 60 + 1;
    for i in (0..above.times.len()).step_by(stride) {
        let t = above.times[i];
        let (_, u) = sys.barriers(t, horizon).unwrap();
        assert!(above.theta[i] >= u, "above trajectory fell to {} < θ_u = {u} at t = {t}", above.theta[i]);
    }
    let stride = below.times.len() / 60 + 1;
    for i in (0..below.times.len()).step_by(stride) {
        let t = below.times[i];
        let (l, _) = sys.barriers(t, horizon).unwrap();
        assert!(below.theta[i] <= l, "below trajectory rose to {} > θ_l = {l} at t = {t}", below.theta[i]);
    }
}

#[test]
fn every_trajectory_ends_in_the_limit_set() {
    let (_, _, sys) = eigen_system(0.5, 2);
    let horizon = sys.default_horizon();
    for theta0 in [-3.0, -1.2, -0.4, 0.0, 0.3, 1.0, 2.5] {
        let tr = integrate_phase(&sys, theta0, horizon, 1e-3).unwrap();
        assert!(distance_to_limit_set(tr.last_theta()) < 0.02, "θ0 = {theta0} ends at {}", tr.last_theta());
    }
    let tr = decaying_solution(&sys, horizon, sys.t_start(), 1e-3).unwrap();
    assert!(distance_to_limit_set(tr.theta[0]) < 0.02);
}

#[test]
fn band_starts_converge_backward_to_the_decaying_solution() {
    let (_, _, sys) = eigen_system(0.5, 1);
    let horizon = sys.default_horizon();
    let far = 2.0 * horizon;
    let (l, u) = sys.barriers(far, 2.0 * far).unwrap();
    let ends: Vec<f64> = [0.1, 0.5, 0.9]
        .iter()
        .map(|w| {
            let tr = integrate_phase_backward(&sys, l + w * (u - l), far, horizon, 1e-3).unwrap();
            tr.last_theta()
        })
        .collect();
    for &th in &ends {
        assert!(th.abs() < 0.01, "θ(horizon) = {th}");
        assert!((th - ends[0]).abs() < 1e-6);
    }
    let (x_minus, _) = sys.roots(horizon).unwrap();
    assert!((ends[0] - x_minus.atan()).abs() < 1e-3);
}

#[test]
fn forward_start_above_upper_barrier_reaches_half_pi() {
    let (_, _, sys) = eigen_system(0.5, 1);
    let horizon = sys.default_horizon();
    let (_, u) = sys.barriers(sys.t_start(), horizon).unwrap();
    for offset in [0.05, 0.5, 1.2] {
        let tr = integrate_phase(&sys, u + offset, horizon, 1e-3).unwrap();
        assert!((tr.last_theta() - FRAC_PI_2).abs() < 0.01);
    }
}

#[test]
fn reconstruction_matches_grid_eigenfunction() {
    // A finer grid than the default, so that the finite-difference error stays below the tolerance.
    for gamma in [0.5, 1.0, 2.0] {
        let p = Potential::new(gamma).unwrap();
        let base = Grid::default_for(&p, 3).unwrap();
        let grid = Grid::with_max_spacing(base.half_width(), 2.5e-3).unwrap();
        let es = solve_eigensystem(&p, &grid, 3).unwrap();
        for k in 1..=3 {
            let sys = PhaseSystem::eigen_equation(&p, es.eigenvalue(k)).unwrap();
            let tr = decaying_solution(&sys, sys.default_horizon(), sys.t_start(), 1e-3).unwrap();
            let hi = 0.9 * grid.half_width();
            let anchor = tr.sample(sys.t_start()).unwrap().1;
            let pairs: Vec<(f64, f64)> = grid
                .nodes()
                .iter()
                .zip(es.eigenfunction(k))
                .filter(|(x, _)| **x >= sys.t_start() && **x <= hi)
                .map(|(x, u)| {
                    let (th, lr) = tr.sample(*x).unwrap();
                    (*u, (lr - anchor).exp() * th.cos())
                })
                .collect();
            let scale = pairs.iter().map(|(u, v)| u * v).sum::<f64>() / pairs.iter().map(|(_, v)| v * v).sum::<f64>();
            let err = pairs.iter().map(|(u, v)| (u - scale * v).abs()).fold(0.0, f64::max);
            let norm = pairs.iter().map(|(u, _)| u.abs()).fold(0.0, f64::max);
            assert!(err / norm < 1e-2, "γ = {gamma}, k = {k}: relative error {}", err / norm);
        }
    }
}

#[test]
fn remainder_settles_at_half_gamma() {
    let (p, lambda, _) = eigen_system(0.5, 1);
    let series = build_series(&p, lambda, Some(2)).unwrap();
    let report = remainder_validation(&p, lambda, &series, None).unwrap();
    assert!(report.theta_at_horizon < 0.01);
    assert!(report.log_r_oscillation < 0.05, "oscillation {}", report.log_r_oscillation);
    assert!(report.passed);
}

#[test]
fn remainder_settles_in_small_gamma_regime() {
    let (p, lambda, _) = eigen_system(0.2, 1);
    let series = build_series(&p, lambda, None).unwrap();
    assert_eq!(series.truncation(), 3);
    let report = remainder_validation(&p, lambda, &series, None).unwrap();
    assert!(report.passed, "{report:?}");
}

#[test]
fn remainder_rejects_short_series() {
    let (p, lambda, _) = eigen_system(0.5, 1);
    let series = build_series(&p, lambda, Some(1)).unwrap();
    assert!(remainder_validation(&p, lambda, &series, None).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn barrier_ordering(gamma in 0.2f64..2.0, lambda in 0.1f64..5.0, scale in 1.0f64..50.0) {
        let p = Potential::new(gamma).unwrap();
        let sys = PhaseSystem::eigen_equation(&p, lambda).unwrap();
        let t = sys.t_start() * scale + 1.0;
        if let Ok((x_minus, _)) = sys.roots(t) {
            let (l, u) = sys.barriers(t, 10.0 * t).unwrap();
            prop_assert!(l <= x_minus.atan() && x_minus.atan() <= u);
        }
    }

    #[test]
    fn rhs_at_half_pi_is_minus_one(gamma in 0.2f64..2.0, lambda in 0.0f64..5.0, t in 1.0f64..100.0) {
        let sys = PhaseSystem::eigen_equation(&Potential::new(gamma).unwrap(), lambda.max(1e-3)).unwrap();
        prop_assert!((sys.theta_rhs(t, FRAC_PI_2) + 1.0).abs() < 1e-9);
    }
}
