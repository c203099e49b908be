use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate edge: source and destination coincide")]
    DegenerateEdge,
    #[error("too few points: need at least {need}, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("empty point cloud: {0}")]
    EmptyCloud(String),
    #[error("scan produced no visible points")]
    EmptyScan,
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("could not place object `{0}` after the maximum number of attempts")]
    Unplaceable(String),
    #[error("unknown object id `{0}`")]
    UnknownObject(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("training diverged at step {step} (loss = {loss})")]
    Diverged { step: usize, loss: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
