//! Error type shared across the crate.

/// Errors reported by constructors and operations.
///
/// Numerical validation failures carry the measured deviation so callers can
/// tell a genuine contract violation from marginal round-off.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("dimension {dim} exceeds the dense-solver cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("dimension {dim} is not a power of two")]
    NotPowerOfTwo { dim: usize },
    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },
    #[error("zero-norm vector cannot be normalized")]
    ZeroNorm,
    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("matrix is not unitary (max deviation {deviation:e})")]
    NotUnitary { deviation: f64 },
    #[error("matrix is not a density operator: {reason}")]
    NotDensity { reason: String },
    #[error("weight {w} out of range for {n} sites")]
    WeightOutOfRange { n: usize, w: usize },
    #[error("reference of size {t} is too small: {reason}")]
    ReferenceTooSmall { t: usize, reason: String },
    #[error("reference of size {t} exhausted after {uses} uses")]
    ReferenceExhausted { t: usize, uses: usize },
    #[error("signature description depends on the private key: {reason}")]
    KeyDependentSignature { reason: String },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
