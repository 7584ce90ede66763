use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("generation failed: {0}")]
    Generation(String),

    #[error("measure undefined: {0}")]
    UndefinedMeasure(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("n = {n} exceeds dense solver cap {cap}; use extremal_eigs instead")]
    Capacity { n: usize, cap: usize },

    #[error("no convergence after {iterations} iterations (residuals {residuals:?})")]
    Convergence { iterations: usize, residuals: Vec<f64> },

    #[error("fitting failed: {0}")]
    Fitting(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("kernel error: {0}")]
    Kernel(String),

    #[error("node {to} unreachable from node {from}")]
    Reachability { from: usize, to: usize },

    #[error("clustering failed: {0}")]
    Clustering(String),

    #[error("training diverged at epoch {epoch} (last finite epoch {last_finite:?})")]
    Training { epoch: usize, last_finite: Option<usize> },

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
