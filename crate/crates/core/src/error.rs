use std::path::PathBuf;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("graph has no nodes")]
    EmptyGraph,

    #[error("graph has no edges")]
    NoEdges,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("node id {0} is out of range")]
    InvalidNode(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("node {0} never appears in the walk corpus")]
    NodeNotInCorpus(usize),

    #[error("loss became non-finite in epoch {epoch}; the learning rate is probably too high")]
    NonFiniteLoss { epoch: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("every cell of the experiment failed")]
    AllCellsFailed,

    #[error("malformed file {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Whether the error stems from reading or writing data rather than from
    /// the computation itself.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Format { .. }
                | Error::Io(_)
                | Error::Json(_)
                | Error::Csv(_)
                | Error::Toml(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
