use thiserror::Error;

/// Errors raised by the retargeting library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("rotation axis norm {norm} is not unit within tolerance")]
    NonUnitAxis { norm: f64 },
    #[error("matrix is not a proper rotation (max orthonormality error {error:e}, det {det})")]
    NotARotation { error: f64, det: f64 },
    #[error("gimbal lock: middle Euler angle at +-pi/2 (sin = {sin_middle})")]
    GimbalLock { sin_middle: f64 },
    #[error("degenerate direction: vector norm {norm:e} below threshold")]
    DegenerateDirection { norm: f64 },

    #[error("inconsistent chain: {0}")]
    InconsistentChain(String),
    #[error("invalid hierarchy: {0}")]
    InvalidHierarchy(String),
    #[error("zero-length link between joint {joint} and its parent")]
    ZeroLengthLink { joint: usize },

    #[error("invalid limb length `{name}` = {value}")]
    InvalidLength { name: String, value: f64 },
    #[error("invalid body definition: {0}")]
    InvalidBody(String),
    #[error("parameter {index} = {value} outside bound [{lo}, {hi}]")]
    OutOfBounds { index: usize, value: f64, lo: f64, hi: f64 },
    #[error("parameter vector has length {got}, expected {expected}")]
    ParamLength { got: usize, expected: usize },

    #[error("degenerate target for link ending at `{keypoint}`")]
    DegenerateTarget { keypoint: String },
    #[error("missing keypoint `{keypoint}`")]
    MissingKeypoint { keypoint: String },
    #[error("sequence too short: {got} frames, need at least {needed}")]
    SequenceTooShort { got: usize, needed: usize },
    #[error("objective is not finite ({value}) at the current iterate")]
    NonFiniteObjective { value: f64 },
    #[error("invalid optimizer settings: {0}")]
    InvalidSettings(String),

    #[error("infeasible limb schedule: {0}")]
    InfeasibleSchedule(String),
    #[error("invalid motion spec: {0}")]
    InvalidMotionSpec(String),

    #[error("sequence length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty joint subset")]
    EmptySubset,

    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unsupported schema `{found}`, expected `{expected}`")]
    Schema { found: String, expected: String },
    #[error("non-finite value at {location}")]
    NonFinite { location: String },
    #[error("invalid file: {0}")]
    InvalidFile(String),
}

impl Error {
    /// True for errors caused by the file system rather than by content.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
