use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum CvqeError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid filling: {electrons} electrons in {orbitals} orbitals")]
    InvalidFilling { orbitals: usize, electrons: usize },

    #[error("capacity exceeded: {what} needs {requested}, limit is {limit}")]
    Capacity {
        what: &'static str,
        requested: f64,
        limit: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("operator is not Hermitian: term {term} has imaginary coefficient {imag:e}")]
    NonHermitian { term: String, imag: f64 },

    #[error("empty basis: {0}")]
    EmptyBasis(String),

    #[error("identity Pauli string has no gate decomposition (pure global phase)")]
    IdentityString,

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    Solver { iterations: usize, residual: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CvqeError {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            CvqeError::Config(_) => 2,
            CvqeError::Capacity { .. } => 3,
            CvqeError::Solver { .. } => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CvqeError>;
