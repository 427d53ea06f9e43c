use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the toolkit.
///
/// Every variant maps to a stable machine-readable [`code`](Error::code);
/// row- and line-level failures carry their locus.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("class count mismatch: expected {expected}, found {found}")]
    ClassMismatch { expected: usize, found: usize },

    #[error("invalid {name}: {reason}")]
    Domain { name: &'static str, reason: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite score at index {index}")]
    NonFiniteScore { index: usize },

    #[error("row {row}: {source}")]
    Row {
        row: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn at_row(self, row: usize) -> Self {
        Error::Row {
            row,
            source: Box::new(self),
        }
    }

    /// Stable identifier for scripted consumers.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidProbabilities(_) => "invalid_probabilities",
            Error::LabelOutOfRange { .. } => "label_out_of_range",
            Error::ClassMismatch { .. } => "class_mismatch",
            Error::Domain { .. } => "domain",
            Error::Empty(_) => "empty_input",
            Error::NonFiniteScore { .. } => "non_finite_score",
            Error::Row { source, .. } => source.code(),
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    /// Zero-based row index, when the failure is attributable to one row.
    pub fn row(&self) -> Option<usize> {
        match self {
            Error::Row { row, .. } => Some(*row),
            _ => None,
        }
    }

    /// One-based line number in an input file, when known.
    pub fn line(&self) -> Option<usize> {
        match self {
            Error::Parse { line, .. } => Some(*line),
            Error::Row { source, .. } => source.line(),
            _ => None,
        }
    }
}
