use thiserror::Error;

pub type Result<T, E = GduError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum GduError {
    #[error("dimension mismatch: left has {left}, right has {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("shape mismatch for {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: String,
        found: String,
    },

    #[error("degenerate data, zero bandwidth")]
    DegenerateData,

    #[error("kernel configuration mismatch: sigma {left} vs {right}")]
    KernelMismatch { left: f64, right: f64 },

    #[error("squared RKHS norm is negative beyond rounding tolerance: {0}")]
    NegativeSquaredNorm(f64),

    #[error("matrix is not square: {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite gradient in parameter block `{block}`")]
    NonFiniteGradient { block: String },

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Divergence { epoch: usize },

    #[error("cannot form {k} clusters from {n} points")]
    TooFewPoints { k: usize, n: usize },

    #[error("cluster {0} is empty")]
    EmptyCluster(usize),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GduError {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        GduError::Parse {
            line,
            msg: msg.into(),
        }
    }
}
