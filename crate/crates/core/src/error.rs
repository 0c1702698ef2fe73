use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("decomposition failed: {0}")]
    DecompositionFailure(String),

    #[error("matrix is not hermitian (‖A − A†‖ = {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not normal (‖T†T − TT†‖ = {0:e})")]
    NotNormal(f64),

    #[error("matrix is not unitary (‖U†U − I‖ = {0:e})")]
    NotUnitary(f64),

    #[error("basis is not orthonormal (max deviation {0:e})")]
    NotOrthonormal(f64),

    #[error("sequence length {length} too small for {required} entries")]
    LengthTooSmall { length: usize, required: usize },

    #[error("exhaustive enumeration limited to n ≤ {max}, got n = {n}")]
    TooLargeForExhaustive { n: usize, max: usize },

    #[error("optimizer history not monotone: {0}")]
    NonConvergence(String),

    #[error("negative radius {0}")]
    NegativeRadius(f64),

    #[error("empty set")]
    EmptySet,

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("set is not contained in the real line (max |Im| = {0:e})")]
    NotRealSet(f64),

    #[error("set sequence is empty or too short")]
    EmptySequence,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
