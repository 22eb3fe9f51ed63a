use thiserror::Error;

/// Errors raised by model construction, simulation, density evaluation and estimation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LobError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid intensity specification: {0}")]
    InvalidIntensity(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("crossed or invalid book: {0}")]
    InvalidBook(String),

    #[error("chain absorbed: total intensity is zero")]
    Absorbed,

    #[error("inconsistent context: {0}")]
    InconsistentContext(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("budget exhausted before any result was produced")]
    Timeout,

    #[error("non-nested models: {0}")]
    NotNested(String),

    #[error("input error: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, LobError>;
