use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mode index {index} out of range for {d} modes")]
    ModeOutOfRange { index: usize, d: usize },

    #[error("sideband {order} has zero weight at modulation index {beta}")]
    ZeroSideband { order: i64, beta: f64 },

    #[error("no Bell visibility threshold tabulated for d = {0} (supported: 2, 3, 5, 7)")]
    UnsupportedDimension(usize),

    #[error("all coincidence counts are zero")]
    ZeroCounts,

    #[error("incomplete dataset, missing settings: {}", .0.join(", "))]
    IncompleteDataset(Vec<String>),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
