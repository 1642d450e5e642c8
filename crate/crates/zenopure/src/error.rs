//! Error type shared by all modules.

use thiserror::Error;

/// Library-wide error enumeration.
///
/// Each variant corresponds to one failure class surfaced by the public
/// operations; the CLI maps a subset of these onto distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be at least {min}, got {got}")]
    InvalidDimension { got: usize, min: usize },

    #[error("joint dimension {requested} exceeds the configured cap {cap}")]
    DimensionCapExceeded { requested: usize, cap: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("vector has (near-)zero norm")]
    DegenerateVector,

    #[error("temperature must be nonnegative, got {0}")]
    InvalidTemperature(f64),

    #[error("mode frequency must be positive, got {0}")]
    InvalidFrequency(f64),

    #[error("truncation dimension {dim} inadequate for coherent amplitude |alpha| = {alpha_abs}")]
    TruncationInadequate { alpha_abs: f64, dim: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("delta vanishes: zero coupling with equal mode frequencies")]
    DegenerateDelta,

    #[error("propagator factorization singular (bracket modulus {0:.3e})")]
    FactorizationSingular(f64),

    #[error("coherent fixed point singular: |1 - exp(-C)| = {0:.3e}")]
    FixedPointSingular(f64),

    #[error("eigenvector matrix numerically defective (condition estimate {0:.3e})")]
    NearDefective(f64),

    #[error("asymptotic prediction undefined: dominant eigenvalue degenerate")]
    AsymptoticsUndefined,

    #[error("no valid nondegenerate tuning record")]
    NoCandidate,

    #[error("matrix is not hermitian (defect {0:.3e})")]
    NotHermitian(f64),

    #[error("effective operator violates the contraction bound (2-norm {0})")]
    ContractionViolated(f64),

    #[error("matrix entries must be finite")]
    NonFiniteEntries,

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

pub type Result<T> = std::result::Result<T, Error>;
