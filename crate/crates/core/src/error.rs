use thiserror::Error;

/// Errors raised by the measurement, estimation and counting routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("measurement strength {0} outside [0, 1]")]
    InvalidStrength(f64),

    #[error("state amplitudes not normalized (norm² = {0})")]
    NotNormalized(f64),

    #[error("postselection probability is numerically zero ({0:e})")]
    ZeroPostselection(f64),

    #[error("weak value undefined at zero measurement strength")]
    ZeroStrength,

    #[error("conditional probability vanishes (pc0 = {pc0:e}, pc1 = {pc1:e}); Fisher information undefined")]
    DegenerateConditional { pc0: f64, pc1: f64 },

    #[error("|kappa * sigma_w| = {0} is at or beyond 1; postselection probability vanishes")]
    SaturatedWeakValue(f64),

    #[error("postselection state orthogonal to the prepared state (p_phi = {0:e})")]
    OrthogonalPostselection(f64),

    #[error("no usable grid points")]
    EmptyGrid,

    #[error("invalid imperfection parameters: {0}")]
    InvalidParams(String),

    #[error("total coincidence probability is numerically zero ({0:e})")]
    GateStarved(f64),

    #[error("invalid acquisition config: {0}")]
    InvalidAcquisition(String),

    #[error("both counts of the postselected channel are zero")]
    EmptyChannel,

    #[error("measured value {value} outside the branch range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("branch [{start}, {end}] rad spans a turning point of the calibration curve")]
    AmbiguousBranch { start: f64, end: f64 },

    #[error("calibration curve slope {0:e} too small; estimate is singular at an extremum")]
    FlatCurve(f64),

    #[error("invalid calibration range: {0}")]
    InvalidRange(String),
}

pub type Result<T> = std::result::Result<T, Error>;
