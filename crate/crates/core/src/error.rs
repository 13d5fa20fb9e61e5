use thiserror::Error;

/// Errors produced by the estimation and beamforming pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is numerically singular (pivot {pivot:.3e} at column {column})")]
    SingularMatrix { column: usize, pivot: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("{groups} groups do not divide {elements} elements")]
    IndivisibleGrouping { elements: usize, groups: usize },

    #[error("no implemented Hadamard construction of order {0}")]
    UnknownOrder(usize),

    #[error("search space too large: {0}")]
    Intractable(String),

    #[error("frame of {t0} symbols leaves no room for data after {training} training symbols")]
    InvalidFrame { t0: usize, training: usize },

    #[error("reflection pattern violates a feasibility constraint: {0}")]
    InfeasiblePattern(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// True for failures of the numerical kernels, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularMatrix { .. } | Error::NotPositiveDefinite | Error::NoConvergence { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
