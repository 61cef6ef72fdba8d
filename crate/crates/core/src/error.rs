use thiserror::Error;

/// Errors raised while validating data or estimating indices.
#[derive(Debug, Error)]
pub enum Error {
    #[error("row mismatch: x has {x} rows but y has {y}")]
    RowMismatch { x: usize, y: usize },

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("duplicate column name: {0}")]
    DuplicateName(String),

    #[error("expected {expected} column names, got {got}")]
    NameCount { expected: usize, got: usize },

    #[error("at least 2 rows and 1 column are required (got {rows}x{cols})")]
    TooSmall { rows: usize, cols: usize },

    #[error("degenerate input: constant column `{column}`")]
    DegenerateInput { column: String },

    #[error("invalid class count {classes} for {rows} rows (need 2 <= M <= N)")]
    InvalidClassCount { classes: usize, rows: usize },

    #[error("zero bound: output sample has no spread under the chosen cost")]
    ZeroBound,

    #[error("invalid cost: {0}")]
    InvalidCost(String),

    #[error("infeasible marginals: {0}")]
    InfeasibleMarginals(String),

    #[error(
        "kernel underflow in Sinkhorn scaling (row/column of exp(-C/eps) is all zero); \
         use sinkhorn-stable or a larger epsilon"
    )]
    KernelUnderflow,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive semi-definite (eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("class {class} of input `{input}` has {size} rows; covariance of a {dim}-dimensional output needs more than {dim}")]
    ClassTooSmall { input: String, class: usize, size: usize, dim: usize },

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("non-finite state while integrating input row {row} at t = {time}")]
    NonFiniteState { row: usize, time: f64 },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("non-numeric at row {row}, column {column}")]
    NonNumeric { row: usize, column: String },

    #[error("empty file: {0}")]
    EmptyFile(String),

    #[error("bootstrap gave up after {0} redraws of degenerate replicates")]
    BootstrapExhausted(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by the data itself rather than by the numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::RowMismatch { .. }
                | Error::NonFinite { .. }
                | Error::DuplicateName(_)
                | Error::NameCount { .. }
                | Error::TooSmall { .. }
                | Error::DegenerateInput { .. }
                | Error::InvalidClassCount { .. }
                | Error::ClassTooSmall { .. }
                | Error::MissingColumn(_)
                | Error::NonNumeric { .. }
                | Error::EmptyFile(_)
                | Error::InvalidSample(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
