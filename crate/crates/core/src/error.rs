use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{quantity} is singular at x = {x}")]
    Domain { quantity: &'static str, x: f64 },

    #[error("no turning point for lambda = {lambda} below search bound {bound}")]
    NoTurningPoint { lambda: f64, bound: f64 },

    #[error("domain too small: V(L) = {v_edge} leaves boundary weight above 1e-30")]
    DomainTooSmall { v_edge: f64 },

    #[error("eigensolver failure: {0}")]
    EigenSolver(String),

    #[error("x = {x} lies outside [-{half_width}, {half_width}]")]
    OutOfDomain { x: f64, half_width: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("no backend can evaluate this coefficient: {0}")]
    Capability(String),

    #[error("degenerate centered datum: every mode up to n is odd")]
    Degenerate,

    #[error("regime verdict inconclusive: {0}")]
    Inconclusive(String),

    #[error("insufficient grid for a stable fit: {0}")]
    InsufficientGrid(String),

    #[error("step underflow at t = {t}")]
    StepUnderflow { t: f64 },
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
