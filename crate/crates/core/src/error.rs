use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Row-level problems found while reading a dataset or predictions file.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: u64, reason: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow { line: u64, expected: usize, found: usize },
    #[error("line {line}: column `{column}` holds non-finite value `{value}`")]
    NonFinite { line: u64, column: String, value: String },
    #[error("line {line}: column `{column}` holds unparseable number `{value}`")]
    InvalidNumber { line: u64, column: String, value: String },
    #[error("line {line}: duplicate id `{id}`")]
    DuplicateId { line: u64, id: String },
    #[error("line {line}: empty {field}")]
    EmptyField { line: u64, field: String },
    #[error("line {line}: {reason}")]
    Malformed { line: u64, reason: String },
}

impl ParseError {
    pub fn line(&self) -> u64 {
        match self {
            ParseError::MalformedHeader { line, .. }
            | ParseError::RaggedRow { line, .. }
            | ParseError::NonFinite { line, .. }
            | ParseError::InvalidNumber { line, .. }
            | ParseError::DuplicateId { line, .. }
            | ParseError::EmptyField { line, .. }
            | ParseError::Malformed { line, .. } => *line,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("class `{0}` has no samples")]
    EmptyClass(String),
    #[error("class `{label}` needs at least {required} samples, got {actual}")]
    InsufficientSamples {
        label: String,
        required: usize,
        actual: usize,
    },
    #[error("matrix is singular or too ill-conditioned for direct inversion")]
    SingularMatrix,
    #[error("zero-norm vector under cosine distance")]
    DegenerateVector,
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("precision matrix unavailable for class `{0}`; fit with Mahalanobis support")]
    PrecisionUnavailable(String),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("entropy is undefined for fewer than two classes")]
    UndefinedEntropy,
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid gaussian spec: {0}")]
    InvalidSpec(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("stratification failed: {0}")]
    Stratification(String),
    #[error("ids missing from predictions: {}", .0.join(", "))]
    Join(Vec<String>),
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Broad failure class, used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numerical,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::SingularMatrix
            | Error::DegenerateVector
            | Error::Numerical(_)
            | Error::PrecisionUnavailable(_) => ErrorClass::Numerical,
            Error::Io(_) => ErrorClass::Io,
            _ => ErrorClass::Validation,
        }
    }
}
