use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid time scale: {0}")]
    InvalidTimeScale(String),

    #[error("t = {t} is not a point of the time scale")]
    NotInTimeScale { t: f64 },

    /// ψ is undefined at the left endpoints θ₂ₖ₋₁.
    #[error("psi is undefined at t = {t} (left endpoint of interval {k})")]
    PsiUndefined { t: f64, k: i64 },

    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("matrix is singular")]
    Singular,

    #[error("{0} did not converge")]
    NoConvergence(&'static str),

    #[error("gamma is undefined at index {k}")]
    GammaUndefined { k: i64 },

    #[error("assumption {name} fails (value {value})")]
    AssumptionFailed { name: &'static str, value: f64 },

    #[error("truncation horizon reaches index {needed} before the seed index {k_min}")]
    TruncationBeyondSeed { needed: i64, k_min: i64 },

    #[error("no sample available at t = {t}")]
    MissingSample { t: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
