use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("EDF parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("EDF structure error: {0}")]
    Structural(String),

    #[error("unknown stage label {token:?} at index {index}")]
    Labeling { token: String, index: usize },

    #[error("label file line {line}: {message}")]
    LabelFile { line: usize, message: String },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("signal error: {0}")]
    Signal(String),

    #[error("spectral error: {0}")]
    Spectral(String),

    #[error("band error: {0}")]
    Band(String),

    #[error("catalog error: {0}")]
    Catalog(String),

    #[error("selection error: {0}")]
    Selection(String),

    #[error("provenance error: {0}")]
    Provenance(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("optimizer diverged: {0}")]
    Divergence(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("attribution error: {0}")]
    Attribution(String),

    #[error("{features} features exceed the exact enumeration limit of {limit}; use the sampling estimator")]
    Size { features: usize, limit: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used to map failures onto process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Data,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Singular(_) | Error::Divergence(_) | Error::Training(_) => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }
}
