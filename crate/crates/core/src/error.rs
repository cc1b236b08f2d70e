use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// Domain-type failures (`Domain`, `NotPositiveDefinite`, `SingularSystem`)
/// are recoverable: optimizers treat them as "step left the parameter
/// domain" and backtrack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not positive definite (pivot {pivot} is {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("line search found no decrease along the search direction")]
    NoDecrease,

    #[error("step still outside the domain after {halvings} halvings")]
    BacktrackExhausted { halvings: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: value {value} is not a nonnegative integer")]
    Integrality { line: usize, value: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures that mean "this point is outside the parameter domain".
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::NotPositiveDefinite { .. } | Error::SingularSystem(_)
        )
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
