use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("model definition error: {0}")]
    ModelDefinition(String),

    #[error("estimation error: {0}")]
    Estimation(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
