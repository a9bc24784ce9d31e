use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("grid does not cover the requested region: {0}")]
    GridTooSmall(String),

    #[error("{got} grid points cannot resolve both position and momentum coverage; at least {min_points} required")]
    InsufficientGridPoints { got: usize, min_points: usize },

    #[error("propagator is not unitary: max |U'U - I| = {deviation:e}")]
    NotUnitary { deviation: f64 },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("only {retained} bound states retained, at least {required} needed for statistics")]
    TooFewStates { retained: usize, required: usize },

    #[error("levels are not strictly increasing at index {index}")]
    NonMonotonic { index: usize },

    #[error("need at least {required} levels, got {got}")]
    TooFewLevels { got: usize, required: usize },

    #[error("degenerate unfolding fit: {0}")]
    DegenerateFit(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("non-positive power {value:e} at k = {k}")]
    NonPositivePower { k: usize, value: f64 },

    #[error("k = {k} is outside the validity range of the closed form (D_H = {dim})")]
    OutsideValidity { k: usize, dim: usize },

    #[error("unsupported ensemble `{0}`")]
    UnsupportedEnsemble(String),

    #[error("trajectory became non-finite at t = {time}")]
    BlowUp { time: f64 },

    #[error("phase-space window exceeds grid support: {0}")]
    WindowOutsideGrid(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
