use thiserror::Error;

/// Errors raised by the numerical and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of a function.
    #[error("domain error in {func}: {detail}")]
    Domain { func: &'static str, detail: String },

    /// A model could not be built from its inputs (non-PSD matrix, bad block layout, ...).
    #[error("model error: {0}")]
    Model(String),

    /// A numerical routine failed to converge or produced an unusable value.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Parsing of a text record or table failed.
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn domain(func: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            func,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
