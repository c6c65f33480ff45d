use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("{value} is not an element of the {group} group")]
    DomainViolation { group: &'static str, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular matrix in action definition at parameter {at}")]
    SingularMatrix { at: f64 },

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("integrand returned a non-finite value at {at:?}")]
    NonFinite { at: Vec<f64> },

    #[error("integrand mass at the grid boundary is {fraction:e} of the total (limit 1e-6); enlarge the domain")]
    SupportEscape { fraction: f64 },

    #[error("grid too coarse: {nodes_per_period:.2} nodes per oscillation period, need at least {required}")]
    UnderResolved { nodes_per_period: f64, required: f64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations (last step {last_step:e})")]
    NoConvergence { iterations: usize, last_step: f64 },

    #[error("not a contraction at this parameter: l = {l}")]
    NotContraction { l: f64 },

    #[error("frequency index {index:?} exceeds the truncation degree {degree}")]
    TruncationOverflow { index: Vec<i64>, degree: u32 },

    #[error("elements belong to different algebras")]
    AlgebraMismatch,
}

pub type Result<T> = std::result::Result<T, Error>;
