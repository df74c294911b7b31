use thiserror::Error;

/// Errors raised by the sampling and recovery routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("point outside the domain: {0}")]
    Domain(String),

    #[error("size limit exceeded: {0}")]
    Size(String),

    #[error(
        "enumeration of {count} subsets exceeds the cap of {cap}; {hint}"
    )]
    Cap { count: u128, cap: u64, hint: &'static str },

    #[error("schedule invariant violated: {0}")]
    Schedule(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Instance {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// Wraps the error with the experiment instance that produced it.
    pub fn in_instance(self, context: impl Into<String>) -> Self {
        Error::Instance {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
