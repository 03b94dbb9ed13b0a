use thiserror::Error;

/// Errors produced by the estimation and attention routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violated a precondition (shape, sign,
    /// finiteness, emptiness).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A computation left the representable range or an iteration produced
    /// non-finite or degenerate state. The message names the failing
    /// quantity and, where applicable, the iterate or row index.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The operation is only defined for a restricted set of dimensions.
    #[error("unsupported dimension {dim}: {context}")]
    UnsupportedDimension { dim: usize, context: &'static str },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
