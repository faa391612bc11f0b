//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("kinetic matrix is not positive semidefinite on its nondegenerate block")]
    NonPhysicalKinetic,

    #[error("constraint loop did not terminate within {0} iterations")]
    IterationLimit(usize),

    #[error("inconsistent dynamics: {0}")]
    InconsistentDynamics(String),

    #[error("degenerate second-class constraint block: {0}")]
    DegenerateConstraint(String),

    #[error("incomplete system: {0}")]
    IncompleteSystem(String),

    #[error("initial point violates constraint {label}: |value| = {value:e}")]
    OffSurface { label: usize, value: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("zero effective force (flat incline): spectrum is continuous and unbounded")]
    ZeroForce,

    #[error("parameter mismatch: {0}")]
    ParamsMismatch(String),

    #[error("unsupported quantisation: {0}")]
    UnsupportedQuantisation(String),

    #[error("unsupported operator order: {0}")]
    UnsupportedOrder(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
