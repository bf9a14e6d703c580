use std::path::PathBuf;

use thiserror::Error;

/// Coarse classification used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {reason}")]
    Csv { path: PathBuf, reason: String },

    #[error("column not found: {0}")]
    ColumnNotFound(String),

    #[error("duplicate column name: {0}")]
    DuplicateColumn(String),

    #[error("non-numeric cell {value:?} at row {row}, column {column}")]
    NonNumeric { row: usize, column: String, value: String },

    #[error("invalid data: {0}")]
    Data(String),

    #[error("column {0} has zero variance")]
    ZeroVariance(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("index {index} out of range for {len} features")]
    Index { index: usize, len: usize },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("division by zero: {0}")]
    ZeroLoss(String),

    #[error("data are linearly separable; maximum-likelihood estimate does not exist")]
    Separation,

    #[error("no convergence after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NoConvergence { iterations: usize, gradient_norm: f64 },

    #[error("all sampled coefficients eliminated in round {round}")]
    AllEliminated { round: usize },

    #[error("no stable survival-rate plateau among the candidates: {0}")]
    NoPlateau(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config { .. } => ErrorClass::Config,
            Error::Io { .. }
            | Error::Csv { .. }
            | Error::ColumnNotFound(_)
            | Error::DuplicateColumn(_)
            | Error::NonNumeric { .. }
            | Error::Data(_)
            | Error::ZeroVariance(_)
            | Error::Dimension { .. }
            | Error::Index { .. } => ErrorClass::Data,
            _ => ErrorClass::Numeric,
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}

pub(crate) fn check_index(index: usize, len: usize) -> Result<()> {
    if index < len {
        Ok(())
    } else {
        Err(Error::Index { index, len })
    }
}
