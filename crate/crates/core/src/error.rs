use thiserror::Error;

/// Errors surfaced by the library. Numerical degeneracies inside optimizer
/// fitness evaluations are absorbed as `+inf` fitness and never reach here.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: {left} vs {right}")]
    DimensionMismatch {
        context: String,
        left: usize,
        right: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate lattice: {0}")]
    DegenerateLattice(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("targets have zero variance; R^2 is undefined")]
    DegenerateVariance,

    #[error("missing energy for structure {index}")]
    MissingEnergy { index: usize },

    #[error("linear solve failed: {0}")]
    SolveFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn dim(context: impl Into<String>, left: usize, right: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            left,
            right,
        }
    }
}
