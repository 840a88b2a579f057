use thiserror::Error;

/// Errors raised by the estimation and inference routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("insufficient sample: need at least 2 observations, got {n}")]
    InsufficientSample { n: usize },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("column {column} has zero variance")]
    DegenerateVariable { column: usize },

    #[error("matrix is not positive semidefinite (minimum eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("the correlation block of the predictors is singular")]
    SingularBlock,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric degeneracy: {0}")]
    NumericDegeneracy(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("target psi {target} is unreachable; the largest achievable value is {max_achievable}")]
    UnreachableTarget { target: f64, max_achievable: f64 },

    #[error("observed statistic is zero; the p-value is 1 and no tail sampling is needed")]
    DegenerateStatistic,

    #[error("resampling produced a constant column {retries} times in a row")]
    ResampleExhausted { retries: usize },

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    /// Whether the error comes from the numerics rather than from malformed input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NotPsd { .. }
                | Error::SingularBlock
                | Error::NumericDegeneracy(_)
                | Error::DegenerateStatistic
                | Error::ResampleExhausted { .. }
                | Error::Internal(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
