use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the compression pipeline.
#[derive(Debug, Error)]
pub enum ApetError {
    #[error("invalid matrix shape: {0}")]
    InvalidShape(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid budget: {0}")]
    InvalidBudget(String),

    #[error("gram matrix is singular after {escalations} jitter escalations")]
    SingularGram { escalations: usize },

    #[error("matrix has zero Frobenius norm")]
    ZeroMatrix,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("plan does not match matrix: {0}")]
    PlanMismatch(String),

    #[error("bad magic bytes {0:?}, expected \"TOKM\"")]
    BadMagic([u8; 4]),

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: u64, found: u64 },

    #[error("trailing bytes after payload: {0} extra")]
    TrailingBytes(u64),

    #[error("ragged csv at line {line}: expected {expected} columns, found {found}")]
    RaggedCsv { line: usize, expected: usize, found: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ApetError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ApetError::Io {
            path: path.into(),
            source,
        }
    }

    /// Coarse classification used by the CLI to pick an exit code.
    pub fn kind(&self) -> ErrorKind {
        match self {
            ApetError::InvalidBudget(_) | ApetError::InvalidArgument(_) => ErrorKind::Usage,
            ApetError::SingularGram { .. } => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

pub type Result<T> = std::result::Result<T, ApetError>;
