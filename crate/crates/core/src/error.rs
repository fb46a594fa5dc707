use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config at `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("time {time} is not on the grid")]
    OffGrid { time: f64 },
    #[error("pairing order {order} not supported: {reason}")]
    PairingOrder { order: usize, reason: &'static str },
    #[error("malformed cross key: {0}")]
    MalformedKey(String),
    #[error("propagator {0} requested before it was computed")]
    MissingPropagator(String),
    #[error("oracle precondition failed: {0}")]
    Oracle(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
