use thiserror::Error;

/// Errors raised by model construction, sampling, and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid group structure: {0}")]
    InvalidGroups(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("numerical conditioning failure: {0}")]
    IllConditioned(String),

    #[error("empty chain: {0}")]
    EmptyChain(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap an error with a location note (e.g. the Gibbs iteration index).
    pub fn with_context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
