use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    VectorParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path} (byte {offset}): {message}")]
    LexicalParse {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("clustering for question {question_id}: {message}")]
    ClusteringFile { question_id: String, message: String },

    #[error("invalid clustering: {0}")]
    InvalidClustering(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("label mismatch between distributions: {left:?} vs {right:?}")]
    LabelMismatch {
        left: Vec<String>,
        right: Vec<String>,
    },

    #[error("cannot form {requested} clusters from {available} vectors")]
    TooFewVectors { requested: usize, available: usize },

    #[error("vectors have inconsistent dimensions ({expected} vs {found})")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("spearman correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("{0}")]
    Sampler(String),

    #[error("dataset {path}:{line}: {message}")]
    Dataset {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("report digests differ ({0} vs {1}); refusing to aggregate")]
    DigestMismatch(String, String),

    #[error("no question could be evaluated")]
    NothingEvaluated,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
