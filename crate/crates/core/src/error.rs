use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {gap:e}")]
    NotSymmetric { i: usize, j: usize, gap: f64 },

    #[error("Jacobi eigensolver did not converge within {sweeps} sweeps")]
    ConvergenceFailure { sweeps: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix has zero spectral radius")]
    ZeroMatrix,

    #[error("normal vector is zero after extension masking")]
    DegenerateNormal,

    #[error("subsample size {subsample} exceeds the number of rows {rows}")]
    SubsampleTooLarge { subsample: usize, rows: usize },

    #[error("no member of the region found in {proposals} proposals")]
    EmptyRegion { proposals: usize },

    #[error("input is empty")]
    EmptyInput,

    #[error("both samples have zero variance")]
    DegenerateVariance,

    #[error("too few anomalies to compare ({first} and {second}, need at least 2 each)")]
    TooFewAnomalies { first: usize, second: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
