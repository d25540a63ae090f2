//! Error types shared across the pricing engine.

use thiserror::Error;

/// Errors produced by input validation and numerical routines.
#[derive(Debug, Error)]
pub enum EngineError {
    /// An input violated a mathematical invariant (e.g. non-positive volatility).
    #[error("domain error: {0}")]
    Domain(String),
    /// A configuration value was malformed or inconsistent.
    #[error("config error: {0}")]
    Config(String),
}

impl EngineError {
    pub fn domain(msg: impl Into<String>) -> Self {
        EngineError::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        EngineError::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, EngineError>;
