use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed input: unknown ids, duplicate ids, capacity violations,
    /// non-finite scores and the like.
    #[error("structural error: {0}")]
    Structural(String),

    /// A caller broke an interface contract, e.g. asked a verified view
    /// about a good that was never allocated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The instance exceeds a hard size guard of an exponential routine.
    #[error("size limit exceeded in {what}: {size} > {limit}{}", hint.as_deref().map(|h| format!(" ({h})")).unwrap_or_default())]
    Size {
        what: &'static str,
        size: usize,
        limit: usize,
        hint: Option<String>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn structural(msg: impl Into<String>) -> Self {
        Error::Structural(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn size(what: &'static str, size: usize, limit: usize) -> Self {
        Error::Size {
            what,
            size,
            limit,
            hint: None,
        }
    }

    pub(crate) fn with_hint(self, hint: impl Into<String>) -> Self {
        match self {
            Error::Size {
                what, size, limit, ..
            } => Error::Size {
                what,
                size,
                limit,
                hint: Some(hint.into()),
            },
            other => other,
        }
    }
}
