use thiserror::Error;

/// Errors produced by model construction and the verification engines.
///
/// Residuals and times are carried as `f64` so the error type does not depend
/// on the scalar parameter.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("operator A is not symmetric (max |A - A^T| = {0:e})")]
    NonSymmetric(f64),
    #[error("operator A is not traceless (trace = {0:e})")]
    NonTraceless(f64),
    #[error("operator A vanishes; strict models need A != 0")]
    ZeroOperator,
    #[error("f is constant; strict models need a nonconstant profile (the constant case is locally symmetric)")]
    ConstantF,
    #[error("dimension n = {n} is below the minimum {min}")]
    DimensionTooSmall { n: usize, min: usize },
    #[error("expected length {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("period must be positive and finite, got {0}")]
    InvalidPeriod(f64),
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("invalid derivative selector: {0}")]
    InvalidSelector(String),
    #[error("tangent vectors are based at different points")]
    BasePointMismatch,
    #[error("operands belong to different models")]
    ModelMismatch,
    #[error("integrator failed at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },
    #[error("Riccati solution blows up at t* = {t_star}")]
    BlowUpDetected { t_star: f64 },
    #[error("geodesic blew up at tau = {tau} (|x| = {norm:e})")]
    BlowUp { tau: f64, norm: f64 },
    #[error("group element is neither of the form (k, 0, 0) nor (0, r, w)")]
    NotAGenerator,
    #[error("group element is not of the form (0, r, w)")]
    NotInSigmaForm,
    #[error("F does not commute with A (||[A, F]|| = {0:e})")]
    NonCommutingF(f64),
    #[error("matrix is not skew-symmetric (residual {0:e})")]
    NotSkew(f64),
    #[error("lattice generators have rank {rank}, {generators} generators supplied")]
    RankDeficient { rank: usize, generators: usize },
    #[error("transport matrix leaves the translation block: {0}")]
    BlockViolation(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
