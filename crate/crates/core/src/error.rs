use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid state graph: {0}")]
    InvalidGraph(String),

    #[error("brute-force channel needs 2^{links} terms; limit is 2^{limit}")]
    TooManyLinks { links: usize, limit: usize },

    #[error("unsupported graph family: {0}")]
    UnsupportedGraph(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
