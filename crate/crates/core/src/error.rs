//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A value passed to an operation violates its preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration value is out of range or inconsistent.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Cholesky factorization of the noisy kernel matrix failed even after
    /// escalating diagonal jitter. Carries the relative jitter levels tried.
    #[error("ill-conditioned kernel matrix: factorization failed after jitter levels {attempted:?}")]
    IllConditionedKernel { attempted: Vec<f64> },

    /// A predicted variance came out more negative than round-off can explain.
    #[error("negative posterior variance {value:.3e} at target {index} (prior variance {prior_variance:.3e})")]
    NegativeVariance {
        index: usize,
        value: f64,
        prior_variance: f64,
    },

    /// Warmup adaptation could not produce a usable chain.
    #[error("adaptation failure: {0}")]
    AdaptationFailure(String),

    /// A data file failed to parse; names the offending line and column.
    #[error("parse error in {path} at line {line}, column `{column}`: {message}")]
    Parse {
        path: String,
        line: usize,
        column: String,
        message: String,
    },

    /// A data file parsed but the contents violate the schema.
    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: distinct classes get distinct codes.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) => 2,
            Error::InvalidInput(_) | Error::Parse { .. } | Error::Validation(_) => 3,
            Error::IllConditionedKernel { .. }
            | Error::NegativeVariance { .. }
            | Error::AdaptationFailure(_) => 4,
            Error::Io(_) => 1,
        }
    }
}
