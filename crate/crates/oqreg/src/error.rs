use thiserror::Error;

/// Errors surfaced by the estimation library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter fell outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A matrix that must be symmetric positive definite is not.
    #[error("matrix not symmetric positive definite: {0}")]
    NotSpd(String),

    /// Dimensions of the supplied arguments do not conform.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// The dataset violates a model requirement.
    #[error("invalid dataset: {0}")]
    InvalidData(String),

    /// The requested model cannot be applied to this dataset.
    #[error("model mismatch: {0}")]
    ModelMismatch(String),

    /// A numeric failure during sampling or optimization.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// An MCMC chain with zero variance cannot be summarized.
    #[error("degenerate chain: {0}")]
    DegenerateChain(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
