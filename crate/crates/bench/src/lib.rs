//! Shared fixtures for the criterion benches.

use cutlab::cutoff::{CutoffModel, CutoffProblem};
use cutlab::spectrum::Grid;
use cutlab::Potential;

/// The default grid for `γ` resolving modes up to `n_modes`.
pub fn default_grid(gamma: f64, n_modes: usize) -> (Potential, Grid) {
    let p = Potential::new(gamma).expect("valid gamma");
    let grid = Grid::default_for(&p, n_modes).expect("default grid");
    (p, grid)
}

pub fn cutoff_model(gamma: f64, x0: f64, n: usize) -> CutoffModel {
    let problem = CutoffProblem::with_default_rule(gamma, x0, n).expect("valid problem");
    CutoffModel::solve(problem).expect("solvable problem")
}
