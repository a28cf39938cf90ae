use std::fmt;

use serde::{Deserialize, Serialize};

use crate::agent::SessionError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error(transparent)]
    Remote(#[from] RemoteError),
    #[error(transparent)]
    Transform(#[from] jabber_core::Error),
    #[error("similarity undefined: {0}")]
    UndefinedSimilarity(String),
    #[error("empty report: no scored records")]
    EmptyReport,
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("could not parse turn: {0}")]
    Parse(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> Error {
        let context = context.into();
        move |source| Error::Io { context, source }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemoteErrorKind {
    /// Rejected credentials (401/403). Not retried.
    Auth,
    Timeout,
    /// 5xx, 429 or a dropped connection, after all attempts.
    Transient,
    /// The response did not contain the configured field.
    Malformed,
    /// The service rejected the input (other 4xx, empty text).
    Input,
    /// The response contradicts the configuration, e.g. a wrong dimension.
    Config,
}

impl fmt::Display for RemoteErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RemoteErrorKind::Auth => "auth",
            RemoteErrorKind::Timeout => "timeout",
            RemoteErrorKind::Transient => "transient",
            RemoteErrorKind::Malformed => "malformed",
            RemoteErrorKind::Input => "input",
            RemoteErrorKind::Config => "config",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{kind} error from {endpoint} after {attempts} attempt(s): {message}")]
pub struct RemoteError {
    pub kind: RemoteErrorKind,
    pub endpoint: String,
    pub attempts: u32,
    pub message: String,
}

impl RemoteError {
    pub fn new(kind: RemoteErrorKind, endpoint: impl Into<String>, message: impl Into<String>) -> Self {
        RemoteError {
            kind,
            endpoint: endpoint.into(),
            attempts: 1,
            message: message.into(),
        }
    }
}
