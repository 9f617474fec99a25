use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("operator is not Hermitian (max entry deviation {max_dev:e})")]
    NotHermitian { max_dev: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("subsystem selector {index} out of range for {count} subsystems")]
    SelectorOutOfRange { index: usize, count: usize },

    #[error("duplicate subsystem index {0} in selector")]
    DuplicateSelector(usize),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid history label: {0}")]
    InvalidLabel(String),

    #[error("invalid family: {0}")]
    InvalidFamily(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid ansatz: {0}")]
    InvalidAnsatz(String),

    #[error("decoherence matrix mode does not match the requested operation: {0}")]
    ModeMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
