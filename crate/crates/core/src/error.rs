use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("duplicate variable name {0:?}")]
    DuplicateName(String),

    #[error("non-finite or unparseable value {value:?} at row {row}, column {column}")]
    NonFinite {
        row: usize,
        column: usize,
        value: String,
    },

    #[error("column {0:?} is near-constant (variance <= 1e-12)")]
    NearConstant(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("dataset must be standardized first")]
    NotStandardized,

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix dimension {0} exceeds the dense solver limit of {max}", max = crate::linalg::MAX_DIM)]
    TooLarge(usize),

    #[error("matrix is not positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("invalid subset: {0}")]
    InvalidSubset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("budget of {budget} exceeded ({what})")]
    BudgetExceeded { what: &'static str, budget: u64 },

    #[error("clique budget of {budget} exceeded; {} multipoles recovered from the partial candidate set", records.len())]
    PartialResult {
        budget: u64,
        records: Vec<crate::measures::MultipoleRecord>,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
