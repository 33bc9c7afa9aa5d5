use thiserror::Error;

/// Errors raised by the path solvers, simulators and experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("natural parameter overflow: |theta| = {theta:.3} exceeds {limit} (poisson log-partition)")]
    Overflow { theta: f64, limit: f64 },

    #[error("Gram matrix is singular (smallest eigenvalue {min_eigenvalue:.3e}); use the ridge or grid solver")]
    SingularGram { min_eigenvalue: f64 },

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:.3e})")]
    Indefinite { eigenvalue: f64 },

    #[error("solver did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("homotopy exceeded {limit} breakpoints")]
    TooManyBreakpoints { limit: usize },

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("no closed form: {0}")]
    NoClosedForm(String),

    #[error("submodel {support:?} failed: {source}")]
    Submodel {
        support: Vec<usize>,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid config at `{pointer}`: {message}")]
    Config { pointer: String, message: String },

    #[error("experiment failed: {0}")]
    Experiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn config(pointer: impl Into<String>, message: impl std::fmt::Display) -> Self {
        Error::Config {
            pointer: pointer.into(),
            message: message.to_string(),
        }
    }
}
