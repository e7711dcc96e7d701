use thiserror::Error as ThisError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, ThisError)]
pub enum Error {
    #[error("matrix must be square and non-empty, got {rows}x{cols}")]
    Shape { rows: usize, cols: usize },
    #[error("ragged input: row {row} has {actual} entries, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix flagged symmetric but entries ({row}, {col}) and ({col}, {row}) differ by {gap:e}")]
    Asymmetric { row: usize, col: usize, gap: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix is singular or ill-conditioned (condition estimate {condition:e})")]
    IllConditioned { condition: f64 },
    #[error("eigenvalue solver did not converge")]
    EigenNonConvergence,
    #[error("dimension {dim} exceeds the permanent cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("cyclic triple condition violated at ({i}, {j}, {k}): product {product:e}")]
    TripleCondition {
        i: usize,
        j: usize,
        k: usize,
        product: f64,
    },
    #[error("sign propagation is inconsistent at ({i}, {j}); near-zero entries: {near_zero:?}")]
    SignInconsistent {
        i: usize,
        j: usize,
        near_zero: Vec<(usize, usize)>,
    },
    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    #[error("cross product C(1,2)·C(2,1) = {product:e} is negative")]
    NegativeCrossProduct { product: f64 },
    #[error("chain kernel has spectral radius {radius} which is not below 1")]
    NotTransient { radius: f64 },
    #[error("entry ({row}, {col}) = {value:e} is negative")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("index {index} is out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("report schema {found} is not supported (expected {expected})")]
    SchemaMismatch { expected: u32, found: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of the numerics themselves (singularity,
    /// nonconvergence, violated preconditions discovered numerically), as
    /// opposed to malformed input or arguments.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::IllConditioned { .. }
                | Error::EigenNonConvergence
                | Error::TripleCondition { .. }
                | Error::SignInconsistent { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::NotPositiveSemidefinite { .. }
                | Error::NegativeCrossProduct { .. }
                | Error::NotTransient { .. }
                | Error::NegativeEntry { .. }
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape { .. } => "shape",
            Error::RaggedRow { .. } => "ragged-row",
            Error::NonFinite { .. } => "non-finite",
            Error::Asymmetric { .. } => "asymmetric",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::IllConditioned { .. } => "ill-conditioned",
            Error::EigenNonConvergence => "eigen-nonconvergence",
            Error::DimensionCap { .. } => "dimension-cap",
            Error::TripleCondition { .. } => "triple-condition",
            Error::SignInconsistent { .. } => "sign-inconsistent",
            Error::NotPositiveDefinite { .. } => "not-positive-definite",
            Error::NotPositiveSemidefinite { .. } => "not-positive-semidefinite",
            Error::NegativeCrossProduct { .. } => "negative-cross-product",
            Error::NotTransient { .. } => "not-transient",
            Error::NegativeEntry { .. } => "negative-entry",
            Error::IndexOutOfRange { .. } => "index-out-of-range",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::SchemaMismatch { .. } => "schema-mismatch",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
