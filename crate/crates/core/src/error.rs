use thiserror::Error;

/// Errors raised across the library. Every variant maps to a stable code so
/// the command-line runner can report it by name.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("P not stochastic: row {row} ({reason})")]
    NotStochastic { row: usize, reason: String },

    #[error("invalid stationary vector: {0}")]
    InvalidStationary(String),

    #[error("no stationary measure available")]
    NoMeasure,

    #[error("not strongly ergodic: {0}")]
    NotStronglyErgodic(String),

    #[error("no spectral gap detected (theta estimate {theta})")]
    NoSpectralGap { theta: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid exponent q = {0}; require 1 <= q < infinity")]
    InvalidExponent(f64),

    #[error("observable is not centered: mean {mean:e}")]
    NotCentered { mean: f64 },

    #[error("observable invariant violated: {0}")]
    InvalidObservable(String),

    #[error("observable `{observable}` cannot be evaluated on {state_kind} states")]
    DomainMismatch {
        observable: String,
        state_kind: &'static str,
    },

    #[error("unsupported norm {0} for this computation")]
    UnsupportedNorm(String),

    #[error("horizon {requested} exceeds the exact-oracle cap {cap}; use Monte Carlo")]
    CapExceeded { requested: usize, cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-contracting system: measured contraction {estimate}")]
    NonContracting { estimate: f64 },

    #[error("forbidden transition {from} -> {to} carries probability {mass}")]
    ForbiddenTransition { from: usize, to: usize, mass: f64 },

    #[error("certificate does not cover the probe closure: {0}")]
    MissingClosure(String),

    #[error("degenerate variance: sigma^2 = {0}")]
    DegenerateVariance(f64),

    #[error("invalid interval map: {0}")]
    InvalidMap(String),
}

impl Error {
    /// Short machine-readable code for reports and exit diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NotStochastic { .. } => "E_NOT_STOCHASTIC",
            Error::InvalidStationary(_) => "E_STATIONARY",
            Error::NoMeasure => "E_NO_MEASURE",
            Error::NotStronglyErgodic(_) => "E_NOT_ERGODIC",
            Error::NoSpectralGap { .. } => "E_NO_GAP",
            Error::Dimension(_) => "E_DIMENSION",
            Error::InvalidExponent(_) => "E_EXPONENT",
            Error::NotCentered { .. } => "E_NOT_CENTERED",
            Error::InvalidObservable(_) => "E_OBSERVABLE",
            Error::DomainMismatch { .. } => "E_DOMAIN",
            Error::UnsupportedNorm(_) => "E_NORM",
            Error::CapExceeded { .. } => "E_CAP",
            Error::InvalidParameter(_) => "E_PARAMETER",
            Error::NonContracting { .. } => "E_NON_CONTRACTING",
            Error::ForbiddenTransition { .. } => "E_FORBIDDEN",
            Error::MissingClosure(_) => "E_CLOSURE",
            Error::DegenerateVariance(_) => "E_DEGENERATE",
            Error::InvalidMap(_) => "E_MAP",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
