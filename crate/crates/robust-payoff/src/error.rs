use thiserror::Error;

/// Crate-wide error type.
///
/// Hypothesis gates are deliberate: a failed check aborts with the name of the
/// violated condition instead of silently falling back to an unjustified
/// construction.
#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Root finding was asked to work on a bracket without a sign change.
    #[error("bracketing error: {0}")]
    Bracket(String),

    /// Adaptive quadrature hit the depth limit before reaching the tolerance.
    #[error("quadrature did not converge (best estimate {best:e}, est. error {error:e})")]
    QuadratureDepth { best: f64, error: f64 },

    /// An integral or moment diverges (or overflows) numerically.
    #[error("divergence: {0}")]
    Divergence(String),

    /// A precondition of the operation does not hold for the given inputs.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A hypothesis required by the underlying optimality result is violated.
    #[error("hypothesis violated: {condition}")]
    HypothesisViolated { condition: String },

    /// The requested combination is not covered by any established result.
    #[error("not covered: {0}")]
    NotCovered(String),

    /// Two independent numerical routes disagree beyond tolerance.
    #[error("cross-check failed: {0}")]
    CrossCheck(String),

    /// Scenario/config validation failure.
    #[error("invalid scenario: {0}")]
    Validation(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn hypothesis(condition: impl Into<String>) -> Self {
        Error::HypothesisViolated {
            condition: condition.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
