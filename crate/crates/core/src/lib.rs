// Negated comparisons are deliberate: they also reject NaN inputs.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cutoff;
pub mod error;
pub mod montecarlo;
pub mod phase;
pub mod potential;
pub mod quadrature;
pub mod scaling;
pub mod spectrum;
pub mod tridiag;
pub mod wkb;

pub use error::{Error, Result};
pub use potential::{PartitionConstants, Potential};
pub use scaling::{verify_scaling, ScaledEigenview, ScalingReport};
pub use spectrum::{solve_eigensystem, EigenSystem, Grid, Parity};
pub use cutoff::{CutoffModel, CutoffProblem, LogValue, Verdict};
pub use montecarlo::{simulate_paths, Estimate, SimConfig, Simulation};
