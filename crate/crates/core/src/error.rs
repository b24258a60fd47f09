use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported node family `{0}`")]
    UnsupportedFamily(String),

    #[error("duplicate interpolation nodes at index {0} and {1}")]
    DuplicateNodes(usize, usize),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("nonpositive period T = {0}")]
    NonpositivePeriod(f64),

    #[error("delay {index} evaluated to a non-finite value")]
    NonFiniteDelay { index: usize },

    #[error("non-finite residual at interval {interval}, node {node}")]
    NonFiniteResidual { interval: usize, node: usize },

    #[error("Jacobian singular at iteration {0}")]
    SingularJacobian(usize),

    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("continuation failed at y0 = {y0}: {reason}")]
    ContinuationFailed { y0: f64, reason: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
