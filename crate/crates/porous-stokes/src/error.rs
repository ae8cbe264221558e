use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid wall: {0}")]
    InvalidWall(String),
    #[error("invalid pore {index}: {reason}")]
    InvalidPore { index: usize, reason: String },
    #[error("discretization needs an even count >= 16 per curve, got {0}")]
    BadPointCount(usize),
    #[error("packing failed: placed {placed} of {requested} pores in {attempts} attempts")]
    PackingFailed {
        placed: usize,
        requested: usize,
        attempts: u64,
    },
    #[error("kernel evaluated at coincident points ({0}, {1})")]
    CoincidentPoints(f64, f64),
    #[error("index {index} out of range for {len} points")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dense operator with {0} unknowns exceeds the size guard of {1}")]
    SizeGuard(usize, usize),
    #[error("degenerate tree: {0}")]
    DegenerateTree(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("singular block for body {body}: {reason}")]
    SingularBlock { body: usize, reason: String },
    #[error("pivot breakdown at cell {cell} on level {level}")]
    PivotBreakdown { level: usize, cell: usize },
    #[error("quadrature correction couples points {0} and {1} across well-separated cells")]
    CorrectionOutsideNearField(usize, usize),
    #[error("target {index} at ({x}, {y}) is not inside the fluid domain")]
    TargetNotInterior { index: usize, x: f64, y: f64 },
    #[error("unknown {kind} '{name}'")]
    UnknownStrategy { kind: &'static str, name: String },
    #[error("linear algebra failure: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),
}
