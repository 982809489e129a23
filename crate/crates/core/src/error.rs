use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors for dataset ingestion, vectorization, clustering and fingerprinting.
#[derive(Error, Debug)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("duplicate sample id `{id}` ({first} and {second})")]
    DuplicateId {
        id: String,
        first: String,
        second: String,
    },

    #[error("synthetic spec produces an empty dataset")]
    EmptySynthetic,

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("vector length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("content category mismatch: expected {expected}, got {got}")]
    CategoryMismatch { expected: String, got: String },

    #[error("pca needs at least {required} sampled vectors, got {available}; use a smaller embedding dimension")]
    PcaTooFewSamples { required: usize, available: usize },

    #[error("no sample pairs available (need at least two samples)")]
    NoPairs,

    #[error("modularity is undefined on a graph with no edges")]
    EmptyGraph,

    #[error("variance threshold {threshold} drops every feature; lower the threshold")]
    AllFeaturesDropped { threshold: f64 },

    #[error("fingerprint training needs at least {required} vectors, got {got}")]
    TooFewTrainingVectors { required: usize, got: usize },

    #[error("one-class solver did not converge after {iterations} iterations (kkt violation {violation:.3e})")]
    SolverDiverged { iterations: usize, violation: f64 },

    #[error("feature space mismatch: fingerprint expects {expected} dimensions, sample has {got}")]
    ShapeMismatch { expected: u64, got: u64 },

    #[error("samples without a truth label: {}", ids.join(", "))]
    UnlabeledSamples { ids: Vec<String> },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("malformed record in {file}{}: {message}", line.map(|l| format!(":{l}")).unwrap_or_default())]
    MalformedRecord {
        file: PathBuf,
        line: Option<usize>,
        message: String,
    },

    #[error("corrupt {what} file {path}: {message}")]
    CorruptFile {
        what: &'static str,
        path: PathBuf,
        message: String,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
