use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unsupported grid size {0}: expected a power of two >= 4")]
    UnsupportedGridSize(usize),
    #[error("modes exceed Nyquist: {modes} retained modes on a grid of {size}")]
    ModesExceedNyquist { modes: usize, size: usize },
    #[error("oracle size guard: grid size {0} exceeds 256")]
    OracleSizeGuard(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("solver blow-up at step {step}")]
    SolverBlowUp { step: usize },
    #[error("trajectory {index}: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("trajectory too short: {steps} snapshots, need at least {needed}")]
    TrajectoryTooShort { steps: usize, needed: usize },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("bad magic in tensor file")]
    BadMagic,
    #[error("unsupported tensor file version {0}")]
    VersionMismatch(u32),
    #[error("unknown dtype code {0}")]
    BadDtype(u8),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("shape overflow in tensor header")]
    ShapeOverflow,
    #[error("missing tensor {0}")]
    MissingTensor(String),
    #[error("hash mismatch for {0}")]
    HashMismatch(String),
    #[error("inconsistent checkpoint: {0}")]
    InconsistentCheckpoint(String),
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("usage error: {0}")]
    Usage(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 usage, 2 data, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::InvalidParameter(_) => 1,
            Error::SolverBlowUp { .. } | Error::NonFiniteLoss { .. } => 3,
            Error::Trajectory { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}
