use std::io;

use thiserror::Error;

/// Errors produced by the fusion library.
#[derive(Debug, Error)]
pub enum FuvarError {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("infeasible point: {0}")]
    Infeasible(String),

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("payload mismatch: header declares {expected} values, found {found}")]
    PayloadMismatch { expected: usize, found: usize },

    #[error("csv error: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl FuvarError {
    /// True for errors caused by the content or format of input data.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            FuvarError::InvalidDimensions(_)
                | FuvarError::NonFinite(_)
                | FuvarError::MalformedHeader(_)
                | FuvarError::PayloadMismatch { .. }
                | FuvarError::Csv(_)
                | FuvarError::Io(_)
        )
    }

    /// True for failures of the numerical methods themselves.
    pub fn is_numerical_error(&self) -> bool {
        matches!(
            self,
            FuvarError::Infeasible(_) | FuvarError::RankDeficient(_) | FuvarError::Numerical(_)
        )
    }
}

impl From<csv::Error> for FuvarError {
    fn from(e: csv::Error) -> Self {
        FuvarError::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, FuvarError>;
