use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller-supplied data violates a precondition.
    #[error("invalid input: {0}")]
    Input(String),

    /// A data file could not be parsed.
    #[error("{source_name}:{line}: {message}")]
    Format {
        source_name: String,
        line: usize,
        message: String,
    },

    /// The n-gram model was asked about a context it never saw.
    #[error("unseen context {0:?}")]
    UnseenContext(String),

    /// Pseudoword generation gave up.
    #[error("generation exhausted after {attempts} attempts; most frequent failure: {constraint}")]
    Exhausted {
        attempts: usize,
        constraint: String,
        tally: Vec<(String, usize)>,
    },

    /// A stem map operation would break injectivity or novelty.
    #[error("stem map: {0}")]
    StemMap(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
