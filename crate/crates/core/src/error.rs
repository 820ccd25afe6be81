use thiserror::Error;

/// Errors raised across the simulation and analytics modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("period unknown: cycle not found within {cap} steps")]
    PeriodUnknown { cap: u64 },
    #[error("infeasible size: {0}")]
    Infeasible(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("no leaky keystream bits: every bit crossover is at least {0}")]
    NoLeakyBits(f64),
    #[error("decode failure: {0}")]
    DecodeFailure(String),
    #[error("refresh refused: {0}")]
    RefreshRefused(String),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
