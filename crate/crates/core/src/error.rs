use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("manifold mismatch: {left} vs {right}")]
    ManifoldMismatch { left: String, right: String },

    #[error("tangent vector is based at a different point")]
    BaseMismatch,

    #[error("point is not on the {manifold}: {detail}")]
    NotOnManifold { manifold: String, detail: String },

    #[error("vector is not tangent at the base point: |<v, p>| = {residual:e}")]
    NotTangent { residual: f64 },

    #[error("retraction is degenerate: |p + t| = {norm:e}")]
    DegenerateRetraction { norm: f64 },

    #[error("line search is undefined at a critical point (zero gradient)")]
    ZeroGradient,

    #[error("invalid manifold: {0}")]
    InvalidManifold(String),

    #[error("invalid objective: {0}")]
    InvalidObjective(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid noise spec: {0}")]
    InvalidNoise(String),

    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),

    #[error("series value at k = {k} is not positive ({value:e})")]
    NonPositive { k: usize, value: f64 },

    #[error("empty window: {0}")]
    EmptyWindow(String),

    #[error("traces cannot be merged: {0}")]
    TraceMismatch(String),

    #[error("missing trace field: {0}")]
    MissingField(&'static str),

    #[error("csv row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
