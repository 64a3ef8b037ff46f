use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("operator is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("operator is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("trace is {0}, expected 1")]
    BadTrace(f64),

    #[error("not a projector: {0}")]
    NotProjector(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("outcome probabilities sum to {0}, deviating from 1 by more than 1e-8")]
    ProbabilityMass(f64),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("zero-probability {0}")]
    ZeroProbability(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("enumeration size {needed} exceeds cap {cap}")]
    CapExceeded { needed: u128, cap: u128 },

    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of a numerical invariant (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPsd(_)
                | Error::NotProjector(_)
                | Error::InvalidPovm(_)
                | Error::ProbabilityMass(_)
                | Error::NoConvergence(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
