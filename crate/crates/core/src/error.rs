use thiserror::Error;

/// Errors produced by the numerical routines and the pipelines built on them.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum HubError {
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("symmetric eigensolver did not converge within {iterations} iterations")]
    ConvergenceFailure { iterations: usize },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("variable {index} has zero variance")]
    ZeroVariance { index: usize },

    #[error("need at least 2 observations, got {n}")]
    InsufficientSamples { n: usize },

    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("eigenvalue ratio denominator {value:e} at position {position} is not positive; increase rho")]
    NonPositiveDenominator { position: usize, value: f64 },

    #[error("spike count {s} outside 1..={p}")]
    InvalidS { s: usize, p: usize },

    #[error("true hub set is empty")]
    EmptyTruth,

    #[error("every variable is a true hub; false positive rate undefined")]
    NoNonHubs,

    #[error("p = {p} >= n = {n}: a screening size is required to invert the correlation matrix")]
    MissingScreenSize { p: usize, n: usize },

    #[error("generated graph has no edges after {attempts} attempts")]
    DegenerateGraph { attempts: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl HubError {
    /// True for failures of the numerics themselves (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            HubError::ConvergenceFailure { .. }
                | HubError::NotPositiveDefinite { .. }
                | HubError::NonPositiveDenominator { .. }
                | HubError::ZeroVariance { .. }
                | HubError::DegenerateGraph { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, HubError>;
