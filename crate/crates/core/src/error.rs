use thiserror::Error;

/// Errors raised while loading data, fitting nuisances or forming estimates.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("rank-deficient design: linearly dependent column(s) {columns:?}")]
    RankDeficient { columns: Vec<String> },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("training error (hidden={hidden}, decay={decay}): {reason}")]
    Training {
        hidden: usize,
        decay: f64,
        reason: String,
    },

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
