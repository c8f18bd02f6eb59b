use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("power iteration did not converge after {iterations} iterations (best estimate {estimate})")]
    NormNotConverged { estimate: f64, iterations: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("ergodic average requested before any step was taken")]
    ZeroWeight,

    #[error("non-positive values at indices {indices:?}")]
    NonPositive { indices: Vec<usize> },

    #[error("trajectories are recorded on different iteration grids")]
    MisalignedGrids,

    #[error("not computable: {0}")]
    NotComputable(String),

    #[error("inadmissible schedule: {0}")]
    Inadmissible(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("missing files: {0:?}")]
    MissingFiles(Vec<PathBuf>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the error is a refusal to proceed on validation grounds (as
    /// opposed to a failure while running).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Inadmissible(_) | Error::Config(_) | Error::InvalidParameter(_) | Error::Json(_)
        )
    }
}
