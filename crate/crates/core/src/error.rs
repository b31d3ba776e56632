use thiserror::Error;

/// Errors produced by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AmoError {
    #[error("matrix is not unimodular (det = {det})")]
    NotUnimodular { det: f64 },

    #[error("point is not in the upper half-plane (Im z = {im})")]
    NotInUpperHalfPlane { im: f64 },

    #[error("matrix is not elliptic (trace = {trace})")]
    NotElliptic { trace: f64 },

    #[error("q = {q} exceeds the supported maximum {max}")]
    DegenerateQ { q: u64, max: u64 },

    #[error("{p}/{q} is not a reduced fraction")]
    NonReduced { p: u64, q: u64 },

    #[error("energy {energy} lies outside the interior of the spectrum")]
    OutsideSpectrum { energy: f64 },

    #[error("only {available} trustworthy partial quotients available ({requested} requested)")]
    PrecisionExhausted { available: usize, requested: usize },

    #[error("continued fraction denominators overflow 64-bit integers at term {term}")]
    BigOverflow { term: usize },

    #[error("window b in [{b_lo}, {b_hi}] is too large to search exactly")]
    WindowTooLarge { b_lo: u64, b_hi: u64 },

    #[error("step budget exceeded: {steps} steps requested, budget is {budget}")]
    StepBudgetExceeded { steps: u64, budget: u64 },

    #[error("need at least {needed} convergents, have {have}")]
    InsufficientTerms { needed: usize, have: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, AmoError>;

pub(crate) fn invalid(msg: impl Into<String>) -> AmoError {
    AmoError::InvalidParameter(msg.into())
}
