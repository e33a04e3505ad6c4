use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("noise trace too short: need {needed} samples, have {available}")]
    TraceTooShort { needed: usize, available: usize },
    #[error("matrix is not Hermitian (relative residual {0:e})")]
    NotHermitian(f64),
    #[error("under-determined fit: {0}")]
    UnderDetermined(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
