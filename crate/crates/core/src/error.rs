use thiserror::Error;

use crate::theory::DriftReport;

/// Errors produced by the sampler, the estimators and the verifiers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A mathematical precondition of an evaluator does not hold.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("root finder did not converge: start {start}, target level {level}")]
    RootFinding { start: f64, level: f64 },

    #[error("thinning bound violated at x = {x}: rate {rate} exceeds declared bound {bound}")]
    ThinningBound { x: f64, rate: f64, bound: f64 },

    #[error("event cap of {cap} exceeded at time {time}")]
    EventCap { cap: usize, time: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("checkpoints must be sorted and lie in [0, horizon]")]
    BadCheckpoints,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("drift condition not certified: {reason}")]
    NotCertified {
        reason: String,
        best: Box<DriftReport>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
