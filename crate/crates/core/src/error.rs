use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed record at line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("dimension mismatch at line {line}: expected {expected}, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value at line {line}")]
    NonFinite { line: usize },

    #[error("duplicate id {id:?} at line {line}")]
    DuplicateId { line: usize, id: String },

    #[error("empty gold_answers at line {line}")]
    EmptyGoldAnswers { line: usize },

    #[error("invalid sidecar file {path}: {message}")]
    Sidecar { path: PathBuf, message: String },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid cluster model: {0}")]
    InvalidModel(String),

    #[error("label {label:?} has no calibration samples")]
    EmptyClass { label: String },

    #[error("query dimension mismatch: model has {expected}, query has {found}")]
    QueryDimension { expected: usize, found: usize },

    #[error("query embedding contains a non-finite value")]
    NonFiniteQuery,

    #[error("scoring sample {id:?}: {source}")]
    Sample {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite score for {id:?}")]
    NonFiniteScore { id: String },

    #[error("degenerate corpus: average document length is zero")]
    DegenerateCorpus,

    #[error("document index {index} out of range for {n_docs} documents")]
    DocIndexOutOfRange { index: usize, n_docs: usize },

    #[error("no outcome record for id {id:?}")]
    MissingOutcome { id: String },

    #[error("policy {policy:?} has no score for id {id:?}")]
    CoverageGap { policy: String, id: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
