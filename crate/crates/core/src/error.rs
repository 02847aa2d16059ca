use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed arguments: empty collections, mismatched dimensions, out-of-range parameters.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A matrix function or map was asked to leave its mathematical domain
    /// (e.g. logarithm of a matrix that is not positive definite).
    #[error("domain error: {0}")]
    DomainError(String),

    /// An iterative procedure broke down. `trace` holds the |ΔR| history up to the failure.
    #[error("numerical failure: {message}")]
    NumericalFailure { message: String, trace: Vec<f64> },

    /// The Hessian-action system of the influence computation is too ill-conditioned to solve.
    #[error("singular Hessian: condition number {condition:e} exceeds {limit:e}")]
    SingularHessian { condition: f64, limit: f64 },

    /// The median sits on a data point, where its influence is undefined.
    #[error("degenerate median: estimate lies within {distance:e} of data point {index}")]
    DegenerateMedian { index: usize, distance: f64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::DomainError(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::NumericalFailure {
            message: msg.into(),
            trace: Vec::new(),
        }
    }
}
