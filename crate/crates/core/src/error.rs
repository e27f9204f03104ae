use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("adjacency matrix is not square ({rows}x{cols})")]
    AdjacencyNotSquare { rows: usize, cols: usize },

    #[error("adjacency entry ({row},{col}) {reason}")]
    InvalidAdjacency {
        row: usize,
        col: usize,
        reason: &'static str,
    },

    #[error("node index {index} out of range for {n}-node network")]
    NodeIndex { index: usize, n: usize },

    #[error("probability {value} outside [0,1]")]
    InvalidProbability { value: f64 },

    #[error("{what}: expected length {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("relative variance rule: node {node} has zero noise variance in the success set")]
    ZeroNoiseVariance { node: usize },

    #[error("enhanced relative degree rule: every effective degree in the success set is zero")]
    ZeroEffectiveDegrees,

    #[error("enumeration too large (2^{bits} outcomes for row {row}), use monte_carlo moments")]
    EnumerationTooLarge { bits: u32, row: String },

    #[error("mean-square unstable configuration: spectral radius {spectral_radius}")]
    MeanSquareUnstable { spectral_radius: f64 },

    #[error("covariance matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("steady-state window {window} exceeds available samples {available}")]
    WindowTooLarge { window: usize, available: usize },

    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} line {line}: {detail}")]
    Parse {
        path: String,
        line: usize,
        detail: String,
    },
}
