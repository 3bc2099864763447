use cutlab::spectrum::{apply_generator, edge_half_width, solve_eigensystem, Grid, Parity};
use cutlab::{verify_scaling, Potential, ScaledEigenview};
use proptest::prelude::*;

const GAMMAS: [f64; 5] = [0.25, 1.0 / 3.0, 0.5, 1.0, 2.0];

/// Probabilists' Hermite polynomials normalized under N(0, 1): `He_k(x)/√k!`.
fn hermite(k: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if k == 0 {
        return 1.0;
    }
    for j in 1..k {
        let next = x * cur - j as f64 * prev;
        prev = cur;
        cur = next;
    }
    let fact: f64 = (1..=k).map(|j| j as f64).product();
    cur / fact.sqrt()
}

#[test]
fn potential_closed_forms() {
    let ou = Potential::new(1.0).unwrap();
    assert_eq!(ou.value(2.0), 2.0);
    assert_eq!(ou.value(-2.0), 2.0);
    assert_eq!(ou.second_derivative(5.0).unwrap(), 1.0);
    assert!((Potential::new(0.5).unwrap().value(1.0) - 2.0 / 3.0).abs() < 1e-15);
    let quartic = Potential::new(2.0).unwrap();
    assert_eq!(quartic.derivative(3.0), 9.0);
    assert_eq!(quartic.second_derivative(-2.0).unwrap(), 4.0);
    assert!(Potential::new(0.5).unwrap().second_derivative(0.0).is_err());
    assert!(Potential::with_constant(1.0, 0.3).is_err());
}

#[test]
fn partition_function_oracles() {
    // ∫ e^{-x²/2} = √(2π); ∫ e^{-x²/8} = 2√(2π); ∫ e^{-|x|^{3/2}/(3/2)} from high-precision quadrature.
    let cases = [
        (1.0, 1.0, (2.0 * std::f64::consts::PI).sqrt()),
        (1.0, 4.0, 5.013_256_549_262_001),
        (0.5, 1.0, 2.365_861_957_663_748_6),
    ];
    for (g, e, z) in cases {
        let c = Potential::new(g).unwrap().log_partition(e).unwrap();
        assert!((c.log_z_eps.exp() / z - 1.0).abs() < 1e-12, "γ = {g}, ε = {e}");
        assert_eq!(c.log_c_eps, -c.log_z_eps);
    }
    for g in GAMMAS {
        let p = Potential::new(g).unwrap();
        for e in [1.0, 0.1] {
            let closed = p.log_partition(e).unwrap().log_z_eps;
            assert!((closed - p.log_partition_quadrature(e)).abs() < 1e-10);
        }
    }
}

#[test]
fn turning_point_oracles() {
    let ou = Potential::new(1.0).unwrap();
    assert!((ou.turning_point(1.0).unwrap() - 6f64.sqrt()).abs() < 1e-9);
    assert!((ou.turning_point(1e-4).unwrap() - 2.0004f64.sqrt()).abs() < 1e-9);
    let quartic = Potential::new(2.0).unwrap();
    assert!((quartic.turning_point(1.0).unwrap() - 1.835_086_681_639_635_4).abs() < 1e-9);
    for g in GAMMAS {
        let p = Potential::new(g).unwrap();
        let x = p.turning_point(2.0).unwrap();
        assert!(p.schrodinger(2.0, x - 1e-3) < 0.0);
        for j in 0..=500 {
            assert!(p.schrodinger(2.0, x + 0.01 * j as f64) >= -1e-12);
        }
    }
}

#[test]
fn ornstein_uhlenbeck_spectrum_and_hermite_modes() {
    let p = Potential::new(1.0).unwrap();
    let grid = Grid::new(12.0, 4001).unwrap();
    let es = solve_eigensystem(&p, &grid, 5).unwrap();
    for k in 0..=5 {
        assert!((es.eigenvalue(k) - k as f64).abs() < 1e-6 * (k as f64).max(1.0), "λ_{k} = {}", es.eigenvalue(k));
    }
    for k in 1..=3 {
        for x in [-2.5, -0.7, 0.3, 1.0, 2.0] {
            let psi = es.eval_eigenfunction(k, x).unwrap();
            assert!((psi - hermite(k, x)).abs() < 1e-4, "ψ_{k}({x}) = {psi}");
        }
    }
}

#[test]
fn orthonormal_and_residual_free() {
    for g in GAMMAS {
        let p = Potential::new(g).unwrap();
        let es = solve_eigensystem(&p, &Grid::default_for(&p, 4).unwrap(), 4).unwrap();
        for j in 0..=4 {
            for k in 0..=4 {
                let target = if j == k { 1.0 } else { 0.0 };
                assert!((es.inner_product(j, k) - target).abs() < 1e-8);
            }
        }
        let band = 0.8 * es.grid().half_width();
        for k in 1..=4 {
            let lu = apply_generator(&p, es.grid(), 1.0, es.eigenfunction(k)).unwrap();
            let sup = es.sup_norm(k);
            for (i, v) in lu.iter().enumerate() {
                let x = es.grid().nodes()[i + 1];
                if x.abs() <= band {
                    let r = (v - es.eigenvalue(k) * es.eigenfunction(k)[i + 1]).abs();
                    assert!(r < 1e-4 * es.eigenvalue(k) * sup, "γ = {g}, k = {k}, x = {x}: residual {r}");
                }
            }
        }
    }
}

#[test]
fn parity_and_sturm_oscillation() {
    for g in GAMMAS {
        let p = Potential::new(g).unwrap();
        let es = solve_eigensystem(&p, &Grid::default_for(&p, 5).unwrap(), 5).unwrap();
        for k in 0..=5 {
            let expected = if k % 2 == 0 { Parity::Even } else { Parity::Odd };
            assert_eq!(es.parities()[k], expected, "γ = {g}, k = {k}");
            assert_eq!(es.zero_count(k), k, "γ = {g}, k = {k}");
            let psi = es.eigenfunction(k);
            assert!(psi[psi.len() - 2] > 0.0);
            if k % 2 == 1 {
                let at_zero = es.eval_eigenfunction(k, 0.0).unwrap();
                assert!(at_zero.abs() < 1e-12 * es.sup_norm(k), "ψ_{k}(0) = {at_zero}");
            }
        }
        assert!(es.eigenvalues().windows(2).all(|w| w[1] > w[0]));
    }
}

#[test]
fn second_order_convergence_in_spacing() {
    let p = Potential::new(0.5).unwrap();
    let lam: Vec<f64> = [2001, 4001, 8001]
        .iter()
        .map(|&n| solve_eigensystem(&p, &Grid::new(24.0, n).unwrap(), 1).unwrap().eigenvalue(1))
        .collect();
    let ratio = (lam[0] - lam[1]) / (lam[1] - lam[2]);
    // The kink of V' at 0 can only lower the order, never raise it past 2.
    assert!(ratio > 3.0 && ratio < 4.6, "Richardson ratio {ratio}");
}

#[test]
fn domain_independence() {
    let p = Potential::new(1.0).unwrap();
    let small = solve_eigensystem(&p, &Grid::with_max_spacing(14.0, 0.01).unwrap(), 3).unwrap();
    let large = solve_eigensystem(&p, &Grid::with_max_spacing(28.0, 0.01).unwrap(), 3).unwrap();
    for k in 1..=3 {
        assert!((small.eigenvalue(k) / large.eigenvalue(k) - 1.0).abs() < 1e-8);
    }
}

#[test]
fn direct_solves_obey_the_scaling_law() {
    for g in [0.5, 2.0] {
        let p = Potential::new(g).unwrap();
        for e in [0.5, 0.25] {
            let report = verify_scaling(&p, e, 3, 1e-4).unwrap();
            assert!(report.passed, "{report:?}");
        }
    }
}

#[test]
fn scaled_view_examples() {
    let p = Potential::new(0.5).unwrap();
    let es = solve_eigensystem(&p, &Grid::default_for(&p, 2).unwrap(), 2).unwrap();
    let view = ScaledEigenview::new(&es, 0.125).unwrap();
    assert!((view.scaled_eigenvalue(1) / es.eigenvalue(1) - 2.0).abs() < 1e-12);
    let c = view.scaled_eigenfunction(0, 0.3).unwrap();
    assert!((c - 1.0).abs() < 1e-6, "ψ_0 = {c}");
    let unit = ScaledEigenview::new(&es, 1.0).unwrap();
    assert_eq!(unit.scaled_eigenfunction(2, 0.7).unwrap(), es.eval_eigenfunction(2, 0.7).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn potential_symmetry(g in 0.1f64..4.0, x in -50.0f64..50.0) {
        let p = Potential::new(g).unwrap();
        prop_assert_eq!(p.value(x), p.value(-x));
        prop_assert_eq!(p.derivative(x), -p.derivative(-x));
    }

    #[test]
    fn derivative_matches_finite_differences(g in 0.1f64..4.0, x in 0.1f64..10.0, s in prop::bool::ANY) {
        let p = Potential::new(g).unwrap();
        let x = if s { x } else { -x };
        let h = 1e-5 * x.abs().max(1.0);
        let fd = (p.value(x + h) - p.value(x - h)) / (2.0 * h);
        prop_assert!((fd - p.derivative(x)).abs() < 1e-6 * p.derivative(x).abs().max(1.0));
    }

    #[test]
    fn scale_exponents_are_consistent(g in 0.2f64..4.0, e in 1e-6f64..1.0) {
        let p = Potential::new(g).unwrap();
        let es = solve_eigensystem(&p, &Grid::new(edge_half_width(&p, 80.0), 401).unwrap(), 1).unwrap();
        let v = ScaledEigenview::new(&es, e).unwrap();
        prop_assert!((v.length_scale().powf(1.0 + g) / e - 1.0).abs() < 1e-12);
        prop_assert!((v.rate_scale() * v.length_scale().powi(2) / e - 1.0).abs() < 1e-12);
    }
}
