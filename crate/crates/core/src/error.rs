use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (max defect {defect:e})")]
    AsymmetricInput { defect: f64 },
    #[error("decomposition did not converge: {0}")]
    ConvergenceFailure(&'static str),
    #[error("matrix is not positive semidefinite (eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("matrix is not positive definite (pivot {pivot:e} at row {index})")]
    NotPositiveDefinite { pivot: f64, index: usize },
    #[error("operator is numerically zero")]
    ZeroOperator,
    #[error("zero dimension")]
    ZeroDimension,
    #[error("non-finite entry")]
    NonFinite,
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid nest: {0}")]
    InvalidNest(String),
    #[error("partition point {point} is not on the nest grid")]
    PartitionNotOnGrid { point: f64 },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("invalid derivative matrix: {0}")]
    InvalidDerivative(String),
    #[error("refinement schedule must have decreasing range")]
    UnorderedSchedule,
    #[error("diagonal has rank {rank} < {dim}")]
    RankDeficientDiagonal { rank: usize, dim: usize },
    #[error("diagonal collapsed: norm {norm:e} below threshold {threshold:e}")]
    DiagonalCollapse { norm: f64, threshold: f64 },
    #[error("operator has rank {rank} < {dim}")]
    RankDeficient { rank: usize, dim: usize },
    #[error("cfl number {cfl} exceeds 1")]
    CflViolation { cfl: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("response data covers {available} time steps, {needed} needed")]
    HorizonTooShort { needed: usize, available: usize },
    #[error("no sample passed the amplitude floor")]
    EmptyMask,
    #[error("control does not vanish at t = 0")]
    IncompatibleControl,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input files or settings rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Parse(_) | Error::Config(_) | Error::Io(_) | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
