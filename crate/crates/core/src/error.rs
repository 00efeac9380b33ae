use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum McpError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("decode error: {0}")]
    Decode(String),
    #[error("encode error: {0}")]
    Encode(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("resource limit exceeded: {needed} candidates > cap {cap}")]
    Resource { needed: u128, cap: u64 },
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for McpError {
    fn from(e: std::io::Error) -> Self {
        McpError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, McpError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(McpError::Domain(msg.into()))
}
