//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type. Every fallible operation reports a structured
/// variant naming the offending quantity.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: operator dim {operator_dim}, vector dim {vector_dim}")]
    DimensionMismatch {
        operator_dim: usize,
        vector_dim: usize,
    },

    #[error("operator is not Hermitian: {detail} (deviation {deviation:.3e}, tolerance {tolerance:.3e})")]
    NotHermitian {
        detail: String,
        deviation: f64,
        tolerance: f64,
    },

    #[error(
        "expectation value has non-negligible imaginary part {imag:.3e} (real part {real:.3e})"
    )]
    ComplexExpectation { real: f64, imag: f64 },

    #[error("cannot normalize a zero vector (norm {norm:.3e})")]
    ZeroNorm { norm: f64 },

    #[error("empty input: {context}")]
    EmptyInput { context: String },

    #[error("all input vectors dropped during orthonormalization (rank zero within drop tolerance {drop_tol:.1e})")]
    RankZero { drop_tol: f64 },

    #[error(
        "basis is not orthonormal: max Gram deviation {deviation:.3e} exceeds {tolerance:.3e}"
    )]
    NotOrthonormal { deviation: f64, tolerance: f64 },

    #[error("dimension {dim} exceeds dense limit {limit}; use an iterative engine")]
    DenseLimitExceeded { dim: usize, limit: usize },

    #[error("shift constant must be positive, got {shift}")]
    NonPositiveShift { shift: f64 },

    #[error("eigenspace rejected: {detail}")]
    InvalidEigenspace { detail: String },

    #[error("solver did not converge: {detail}")]
    NonConvergence { detail: String },

    #[error("search space is empty: forbidden subspace rank {rank} equals dimension {dim}")]
    EmptySearchSpace { rank: usize, dim: usize },

    #[error("shift escalation exhausted after {attempts} attempts: {detail}")]
    ShiftEscalationExhausted { attempts: usize, detail: String },

    #[error("spectrum exhausted: only {distinct} distinct eigenvalues available, requested excitation {requested}")]
    SpectrumExhausted { distinct: usize, requested: usize },

    #[error("residual check against the original operator failed: max residual {residual:.3e} exceeds {tolerance:.3e}")]
    ResidualCheckFailed { residual: f64, tolerance: f64 },

    #[error("{operation} is unsupported for this input: {detail}")]
    Unsupported { operation: String, detail: String },

    #[error("invalid model: field `{field}`: {detail}")]
    InvalidModel { field: String, detail: String },

    #[error("model dimension {dim} overflows the supported limit {limit}")]
    DimensionOverflow { dim: usize, limit: usize },

    #[error("density is not representable at tolerance: max occupation violation {violation:.3e} exceeds {tolerance:.1e}")]
    InfeasibleDensity { violation: f64, tolerance: f64 },

    #[error("invalid density: {detail}")]
    InvalidDensity { detail: String },

    #[error("density minimization failed: {detail}")]
    DensitySearchFailed { detail: String },

    #[error("invalid config: key `{key}`: {detail}")]
    InvalidConfig { key: String, detail: String },

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("matrix file error at line {line}: {detail}")]
    MatrixMarket { line: usize, detail: String },

    #[error("eigendecomposition backend failure: {0}")]
    Backend(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Backend(e.to_string())
    }
}
