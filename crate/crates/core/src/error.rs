use thiserror::Error;

/// Errors raised by the geometry, control and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("depth must be strictly positive, got {0}")]
    InvalidDepth(f64),
    #[error("actuation mask enables no velocity component")]
    EmptyMask,
    #[error("tilt angle {0} rad is not below pi/2")]
    TiltOutOfRange(f64),
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("polygon area {0:e} is at or below the degeneracy threshold")]
    DegenerateArea(f64),
    #[error("reference-angle denominator {0:e} is at or below the singularity threshold")]
    AngleSingularity(f64),
    #[error("propagated polygon became degenerate: {0}")]
    StepDegeneracy(Box<Error>),
    #[error("target polygon is degenerate or self-intersecting at t = {t}")]
    DegenerateTarget { t: f64 },
    #[error("barrier {constraint} blew up (L = {value:e})")]
    BarrierBlowup { constraint: usize, value: f64 },
    #[error("input component {axis} = {value} is at its limit {limit}")]
    InputAtLimit { axis: usize, value: f64, limit: f64 },
    #[error("rollout left the safe set at prediction step {step}")]
    InfeasibleRollout { step: usize },
    #[error("initial state violates the barrier constraints")]
    InfeasibleStart,
    #[error("target lost: vertex {vertex} left the image at t = {t}")]
    TargetLost { vertex: usize, t: f64 },
    #[error("camera pose is invalid: {0}")]
    InvalidPose(String),
    #[error("run too short for the steady-state window: {samples} samples, need {required}")]
    ShortRun { samples: usize, required: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Config(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
