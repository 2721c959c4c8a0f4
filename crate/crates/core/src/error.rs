use std::path::PathBuf;

/// Errors raised by parsing, retrieval, fusion and pipeline execution.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("duplicate entry: {0}")]
    Duplicate(String),

    #[error("invalid value: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("missing document `{0}` in vector set")]
    MissingDocument(String),

    #[error(
        "reranker scores query `{query}` doc `{doc}`, which is not in the candidate top-{depth}"
    )]
    RerankDocument {
        query: String,
        doc: String,
        depth: usize,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid pipeline config: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            line,
            reason: reason.into(),
        }
    }

    /// Attach a file path to a bare I/O error.
    pub fn with_path(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
        let path = path.into();
        move |source| Error::File { path, source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
