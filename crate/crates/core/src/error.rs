use thiserror::Error;

/// Errors raised by the process engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid specification at `{path}`: {msg}")]
    InvalidSpec { path: String, msg: String },

    #[error("exponential moment of order {n} diverges: a positive tail of the environment is too heavy")]
    DivergentExponent { n: u32 },

    #[error("cross-type first jump moment `{which}` is infinite")]
    DivergentCrossMoment { which: &'static str },

    #[error("recursion coefficient needs jump moment of order {order}, which is infinite")]
    DivergentCoefficient { order: u32 },

    #[error("moment hypothesis violated at degree {degree}: {reason}")]
    HypothesisViolated { degree: u32, reason: String },

    #[error("step must be positive and not exceed the horizon (step = {step}, horizon = {horizon})")]
    InvalidStep { step: f64, horizon: f64 },

    #[error("expected event count {expected:.3e} exceeds the cap {cap:.3e}")]
    MassOverflow { expected: f64, cap: f64 },

    #[error("environment measure has infinite activity and cannot be sampled")]
    InfiniteActivity,

    #[error("negative state {value} at t = {t}")]
    NegativeState { t: f64, value: f64 },

    #[error("moment ODE solution is not finite at t = {t}")]
    SolverTolerance { t: f64 },

    #[error("fixed-point iteration failed to converge at t = {t}; refine the grid")]
    FixedPointDivergence { t: f64 },

    #[error("initial-value grid is rank deficient ({rank} of {needed} basis functions resolved)")]
    RankDeficientGrid { rank: usize, needed: usize },

    #[error("initial state is (0, 0)")]
    ZeroInitialState,

    #[error("configuration error at `{path}`: {msg}")]
    Config { path: String, msg: String },
}

impl Error {
    pub fn spec(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::InvalidSpec {
            path: path.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
