use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty or inverted domain on axis {axis}: [{lo}, {hi}]")]
    EmptyDomain { axis: usize, lo: f64, hi: f64 },

    #[error("knots must be strictly increasing inside the domain (axis {axis})")]
    BadKnots { axis: usize },

    #[error("basis dimension {dim} exceeds the configured maximum {max}")]
    DimensionOverflow { dim: usize, max: usize },

    #[error("requested dimension {dim} is not achievable for this basis kind")]
    DimensionNotAchievable { dim: usize },

    #[error("point lies outside the domain on axis {axis}: {value}")]
    OutsideDomain { axis: usize, value: f64 },

    #[error("matrix contains NaN or infinite entries")]
    NonFiniteMatrix,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operation requires a positive definite Gram matrix, but the factorization fell back to a pseudo-inverse")]
    PseudoInverseMode,

    #[error("response '{label}' evaluated to a non-finite value")]
    NonFiniteResponse { label: String },

    #[error("response family is empty")]
    EmptyFamily,

    #[error("the residual moment P(q eps^2) = {value:.3e} is below 1e-14; the rate check is vacuous")]
    VacuousRateCheck { value: f64 },

    #[error("population moment oracle accuracy {achieved:.3e} is insufficient (needed {needed:.3e}) for {quantity}")]
    OracleAccuracy {
        quantity: String,
        achieved: f64,
        needed: f64,
    },

    #[error("n grid must be nonempty and strictly increasing")]
    BadSampleGrid,

    #[error("{0}")]
    Invalid(String),
}
