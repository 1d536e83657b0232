use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("model is not diagonally periodic and carries no analytic norm bounds")]
    UnboundedModel,

    #[error("hypothesis (H) violated: F(s1, s) = {value} <= 0 at s = {at}")]
    DiagonalNotPositive { at: f64, value: f64 },

    #[error("hypotheses do not hold: (H) = {holds_h}, (H*) = {holds_hstar}")]
    HypothesesFailed { holds_h: bool, holds_hstar: bool },

    #[error("dispersion bound D = {d} outside (0, D* = {d_star}]")]
    DispersionOutOfRange { d: f64, d_star: f64 },

    #[error("dispersion curve sample {index} is not positive ({value})")]
    NonPositiveCurve { index: usize, value: f64 },

    #[error("state dimension {got} does not match model dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("companion velocity {velocity} <= 0 at t = {t} inside the tube")]
    CompanionNotIncreasing { t: f64, velocity: f64 },

    #[error("companion did not reach level {level} before t = {t_max}")]
    LevelNotReached { level: f64, t_max: f64 },

    #[error("trajectory was recorded against a different dispersion curve")]
    CurveMismatch,

    #[error("perturbation is not 1-periodic")]
    NonPeriodicPerturbation,

    #[error("return time {theta} outside ({lower}, {upper})")]
    ReturnTimeOutOfBounds { theta: f64, lower: f64, upper: f64 },

    #[error("Poincare image left the section: max |P_i| = {max_abs} >= {radius}")]
    LeftSection { max_abs: f64, radius: f64 },

    #[error("singular Jacobian in Newton step")]
    SingularJacobian,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
