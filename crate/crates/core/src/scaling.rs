//! Small-noise scaling: `-L_ε` has eigenpairs `(λ_k ε^{(γ-1)/(γ+1)}, ψ_k(x ε^{-1/(1+γ)}))`.

use crate::error::{invalid, Error, Result};
use crate::potential::Potential;
use crate::spectrum::{solve_eigensystem_eps, EigenSystem, Grid};

/// View of a base (`ε = 1`) eigensystem at noise level `ε`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledEigenview<'a> {
    base: &'a EigenSystem,
    epsilon: f64,
    length_scale: f64,
    rate_scale: f64,
}

impl<'a> ScaledEigenview<'a> {
    pub fn new(base: &'a EigenSystem, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(invalid("epsilon", format!("must be positive, got {epsilon}")));
        }
        if base.epsilon() != 1.0 {
            return Err(invalid("base", "scaled views require an ε = 1 eigensystem"));
        }
        let g = base.gamma();
        Ok(Self {
            base,
            epsilon,
            length_scale: epsilon.powf(1.0 / (1.0 + g)),
            rate_scale: epsilon.powf((g - 1.0) / (g + 1.0)),
        })
    }

    pub fn base(&self) -> &'a EigenSystem {
        self.base
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    pub fn rate_scale(&self) -> f64 {
        self.rate_scale
    }

    pub fn scaled_eigenvalue(&self, k: usize) -> f64 {
        self.base.eigenvalue(k) * self.rate_scale
    }

    pub fn scaled_eigenfunction(&self, k: usize, x: f64) -> Result<f64> {
        self.base.eval_eigenfunction(k, x / self.length_scale)
    }
}

/// Outcome of comparing direct `ε`-solves with the scaled base system.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub epsilon: f64,
    pub max_rel_eigenvalue_error: f64,
    pub max_norm_error: f64,
    pub passed: bool,
}

/// Solves `-L_ε` directly on the base grid rescaled by `ε^{1/(1+γ)}` and compares it with the
/// scaling law; also checks that scaled eigenfunctions keep unit norm in `L²(C_ε e^{-V/ε})`.
pub fn verify_scaling(p: &Potential, epsilon: f64, n_modes: usize, tol: f64) -> Result<ScalingReport> {
    if epsilon < 0.05 {
        return Err(Error::Precondition(format!(
            "direct solves are restricted to ε ≥ 0.05, got {epsilon}"
        )));
    }
    let base_grid = Grid::default_for(p, n_modes)?;
    let base = solve_eigensystem_eps(p, &base_grid, n_modes, 1.0)?;
    verify_scaling_against(&base, epsilon, tol)
}

/// As [`verify_scaling`], against an already solved base system.
pub fn verify_scaling_against(base: &EigenSystem, epsilon: f64, tol: f64) -> Result<ScalingReport> {
    let p = base.potential();
    let view = ScaledEigenview::new(base, epsilon)?;
    let grid = Grid::new(base.grid().half_width() * view.length_scale, base.grid().n_points())?;
    let direct = solve_eigensystem_eps(&p, &grid, base.n_modes(), epsilon)?;

    let mut max_rel_eigenvalue_error: f64 = 0.0;
    let mut max_norm_error: f64 = 0.0;
    for k in 1..=base.n_modes() {
        let predicted = view.scaled_eigenvalue(k);
        max_rel_eigenvalue_error = max_rel_eigenvalue_error.max((direct.eigenvalue(k) - predicted).abs() / predicted);
        let mut norm = 0.0;
        for (x, w) in grid.nodes().iter().zip(direct.quad_weight()) {
            // Rounding can push the outermost rescaled node a hair past the base grid.
            let y = x.clamp(-grid.half_width(), grid.half_width());
            let psi = view.scaled_eigenfunction(k, y).or_else(|_| view.scaled_eigenfunction(k, y * (1.0 - 1e-15)))?;
            norm += w * psi * psi;
        }
        max_norm_error = max_norm_error.max((norm - 1.0).abs());
    }
    Ok(ScalingReport {
        epsilon,
        max_rel_eigenvalue_error,
        max_norm_error,
        passed: max_rel_eigenvalue_error < tol && max_norm_error < tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::solve_eigensystem;

    #[test]
    fn exponents_are_consistent() {
        let p = Potential::new(0.5).unwrap();
        let es = solve_eigensystem(&p, &Grid::default_for(&p, 2).unwrap(), 2).unwrap();
        let view = ScaledEigenview::new(&es, 0.125).unwrap();
        assert!((view.length_scale().powf(1.5) / 0.125 - 1.0).abs() < 1e-12);
        assert!((view.rate_scale() * view.length_scale().powi(2) / 0.125 - 1.0).abs() < 1e-12);
        assert!((view.scaled_eigenvalue(1) - 2.0 * es.eigenvalue(1)).abs() < 1e-12);
        assert!((view.scaled_eigenfunction(0, 0.3).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn unit_view_is_identity() {
        let p = Potential::new(2.0).unwrap();
        let es = solve_eigensystem(&p, &Grid::default_for(&p, 2).unwrap(), 2).unwrap();
        let view = ScaledEigenview::new(&es, 1.0).unwrap();
        for &x in &[-1.3, 0.0, 0.7] {
            assert_eq!(view.scaled_eigenfunction(2, x).unwrap(), es.eval_eigenfunction(2, x).unwrap());
        }
        let r = verify_scaling_against(&es, 1.0, 1e-10).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn ou_rates_do_not_move() {
        let p = Potential::new(1.0).unwrap();
        let es = solve_eigensystem(&p, &Grid::new(12.0, 4001).unwrap(), 1).unwrap();
        let view = ScaledEigenview::new(&es, 0.25).unwrap();
        assert_eq!(view.scaled_eigenvalue(1), es.eigenvalue(1));
        assert_eq!(view.scaled_eigenfunction(1, 0.5).unwrap(), es.eval_eigenfunction(1, 1.0).unwrap());
        assert!(verify_scaling(&p, 0.5, 3, 1e-6).unwrap().passed);
    }

    #[test]
    fn third_power_quarters() {
        let p = Potential::new(3.0).unwrap();
        let es = solve_eigensystem(&p, &Grid::default_for(&p, 1).unwrap(), 1).unwrap();
        let view = ScaledEigenview::new(&es, 1.0 / 16.0).unwrap();
        assert!((view.scaled_eigenvalue(1) - es.eigenvalue(1) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn direct_solve_matches() {
        let p = Potential::new(0.5).unwrap();
        let r = verify_scaling(&p, 0.25, 3, 1e-4).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(verify_scaling(&p, 0.01, 3, 1e-4).is_err());
    }
}
