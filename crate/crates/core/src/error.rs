use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("excerpt {excerpt}: invalid {field}: {message}")]
    Invalid {
        excerpt: String,
        field: &'static str,
        message: String,
    },

    #[error("duplicate excerpt id {0}")]
    DuplicateId(String),

    #[error("excerpt {excerpt}: unknown label {label:?}")]
    UnknownLabel { excerpt: String, label: String },

    #[error("excerpt {0}: no dependency parse; supply parses or disable subtree suggestions")]
    MissingParses(String),

    #[error("{what}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("no precomputed vectors for excerpt {0}")]
    MissingVectors(String),

    #[error("malformed container: {0}")]
    Format(String),

    #[error("non-finite gradient in tensor {0}")]
    NonFiniteGradient(String),

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("corpus too small: need at least {need} excerpts, have {have}")]
    CorpusTooSmall { need: usize, have: usize },

    #[error("duplicate span boundaries ({start}, {end}) on one side of an alignment")]
    DuplicateBoundary { start: usize, end: usize },

    #[error("kappa undefined: chance agreement is 1 but observed agreement is {observed}")]
    DegenerateKappa { observed: f64 },

    #[error("annotator {0} has no spans in the corpus")]
    UnknownAnnotator(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(excerpt: &str, field: &'static str, message: impl Into<String>) -> Self {
        Error::Invalid {
            excerpt: excerpt.to_string(),
            field,
            message: message.into(),
        }
    }
}
