use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the reduction, clustering and I/O stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix must be at least 2x2, got {rows}x{cols}")]
    TooSmall { rows: usize, cols: usize },

    #[error("matrix entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },

    #[error("expected {expected} values, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("row labels: {0}")]
    InvalidLabels(String),

    #[error("row {0} has zero variance")]
    ZeroVarianceRow(usize),

    #[error("row {row} is not standardized (mean {mean:e})")]
    NotStandardized { row: usize, mean: f64 },

    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {gap:e}")]
    NotSymmetric { i: usize, j: usize, gap: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    ConvergenceFailure { what: &'static str, iterations: usize },

    #[error("signal of length {len} is too short, need at least {min}")]
    SignalTooShort { len: usize, min: usize },

    #[error("sifting hit the cap of {cap} iterations without producing an IMF")]
    SiftingDivergence { cap: usize },

    #[error("component selection is empty")]
    EmptySelection,

    #[error("component index {index} out of range for {n} components")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("no eigenvalue exceeds the Wishart edge {lambda_plus:.4}: no informative components")]
    EmptyWishartSelection { lambda_plus: f64 },

    #[error("cannot form {k} clusters from {n} points")]
    TooManyClusters { k: usize, n: usize },

    #[error("cannot form {k} clusters from {distinct} distinct points")]
    DegeneratePoints { k: usize, distinct: usize },

    #[error("cluster {0} is empty")]
    EmptyCluster(usize),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("centroids {0} and {1} coincide")]
    CoincidentCentroids(usize, usize),

    #[error("the Davies-Bouldin index needs at least 2 clusters, got {0}")]
    FewerThanTwoClusters(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: file is empty")]
    EmptyFile { path: PathBuf },

    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRows { line: usize, expected: usize, found: usize },

    #[error("line {line}, column {column}: cannot parse {cell:?} as a number")]
    NonNumericCell { line: usize, column: usize, cell: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit code: 2 input error, 3 numeric failure, 4 empty selection.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::EmptyWishartSelection { .. } | Error::EmptySelection => 4,
            Error::ConvergenceFailure { .. }
            | Error::SiftingDivergence { .. }
            | Error::NotSymmetric { .. }
            | Error::NotStandardized { .. }
            | Error::ZeroVarianceRow(_)
            | Error::DegeneratePoints { .. }
            | Error::CoincidentCentroids(..)
            | Error::EmptyCluster(_) => 3,
            _ => 2,
        }
    }
}
