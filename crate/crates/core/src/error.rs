use thiserror::Error;

/// Library-wide error type.
///
/// The variants map onto the CLI exit-code contract: `InvalidArgument`,
/// `Domain`, `Input` and `Precondition` are caller mistakes, while
/// `NearExceptional`, `Degeneracy` and `Range` are numerical refusals.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("input error: {0}")]
    Input(String),

    #[error(
        "near-exceptional point: eigenvector condition number {cond:.3e} exceeds {threshold:.3e}; \
         the matrix is not diagonalizable within the requested tolerance"
    )]
    NearExceptional { cond: f64, threshold: f64 },

    #[error("ambiguous eigenvalue pairing (degeneracy): {0}")]
    Degeneracy(String),

    #[error("numerical range exceeded: {0}")]
    Range(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("LAPACK {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },
}

pub type Result<T> = std::result::Result<T, Error>;
