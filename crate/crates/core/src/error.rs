use thiserror::Error;

/// Crate-wide error type.
///
/// Numeric routines return structured variants so the harness can map a failure back to
/// the offending quantity (a kernel constant, a particle, a quadrature node) instead of
/// surfacing a bare float.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("non-finite input in {0}")]
    NonFinite(&'static str),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("{what} violated at x = {at:?}: value {value} exceeds {limit}")]
    ConstantViolation {
        what: &'static str,
        at: Vec<f64>,
        value: f64,
        limit: f64,
    },

    #[error("numeric overflow in {context}")]
    NumericOverflow { context: String },

    #[error("total mass mismatch: {0} vs {1}")]
    MassMismatch(f64, f64),

    #[error("transport solver failed: {0}")]
    SolverFailure(String),

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("step too large: jacobian {jacobian} at node {node}")]
    StepTooLarge { node: usize, jacobian: f64 },

    #[error("discretization failure: {0}")]
    Discretization(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("Stein quadratic form strongly negative ({0}); kernel, score, and summation are inconsistent")]
    GramNegative(f64),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
