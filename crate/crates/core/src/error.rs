use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid triplet: {0}")]
    InvalidTriplet(String),

    #[error("first moment absent: the jump measure has no finite mean, so it cannot be martingale-normalized")]
    FirstMomentAbsent,

    #[error("invalid boundary: {0}")]
    InvalidBoundary(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no jumps of required sign: the tilt needs finite-activity jumps on the {side} side")]
    NoJumpsOfRequiredSign { side: &'static str },

    #[error(
        "zero survival estimate at T = {horizon}; use importance sampling or drop the largest horizons"
    )]
    ZeroSurvival { horizon: f64 },

    #[error("iterate escaped (0, 1] at level {level} (value {value:e})")]
    IterateEscaped { level: usize, value: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
