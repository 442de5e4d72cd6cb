use std::path::PathBuf;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: String,
        row: usize,
        column: String,
        message: String,
    },

    #[error("unknown column(s) {missing:?}; available: {available:?}")]
    MissingColumns {
        missing: Vec<String>,
        available: Vec<String>,
    },

    #[error("unknown identifier `{0}`")]
    UnknownId(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate column `{0}`: zero variance over present entries")]
    DegenerateColumn(String),

    #[error("bin {0} is empty at every time point")]
    EmptyBin(usize),

    #[error("phase is undefined for a zero-amplitude profile")]
    UndefinedPhase,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("rank deficient design: {0}")]
    Rank(String),

    #[error("invalid specification: {0}")]
    Spec(String),

    #[error("gLV state became non-finite at step {0}")]
    BlowUp(usize),

    #[error("chain {chain}: {message}")]
    Chain { chain: usize, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
