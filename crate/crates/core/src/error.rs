use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed configuration entry at layer {index}: {reason}")]
    MalformedEntry { index: usize, reason: String },

    #[error("dangling link: layer {index} references {link}")]
    DanglingLink { index: usize, link: i64 },

    #[error("layer {index} has non-positive repeats {repeats}")]
    InvalidRepeats { index: usize, repeats: i64 },

    #[error("configuration has no detect node")]
    MissingDetect,

    #[error("configuration has more than one detect node ({0} found)")]
    MultipleDetect(usize),

    #[error("head {0} is not present in the graph")]
    MissingHead(String),

    #[error("retained set is not closed: layer {index} references pruned layer {target}")]
    NotClosed { index: usize, target: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("detector failure: {0}")]
    Detector(String),

    #[error("schema violation: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
