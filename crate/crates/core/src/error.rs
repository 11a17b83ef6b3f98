use std::path::PathBuf;

/// Errors raised by the core toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("header has {found} columns, need at least {required}")]
    HeaderTooShort { found: usize, required: usize },
    #[error("no rows survived filtering ({dropped} dropped)")]
    NoRowsSurvived { dropped: usize },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("hyperparameter out of range: {0}")]
    HyperparameterOutOfRange(String),
    #[error("empty search space: {0}")]
    EmptySearchSpace(String),
    #[error("training failed: {0}")]
    TrainingFailed(String),
    #[error("MAPE undefined: every target is below the zero-exclusion threshold")]
    UndefinedMape,
    #[error("operation requires a gradient-boosted tree model")]
    NotTreeModel,
    #[error("hypervolume is only supported for 2 or 3 objectives, got {0}")]
    UnsupportedDimension(usize),
    #[error("no analytic Pareto front for problem {0}")]
    FrontUnavailable(String),
    #[error("unknown problem: {0}")]
    UnknownProblem(String),
    #[error("every sampled design was infeasible")]
    AllInfeasible,
    #[error("degenerate normalization range for objective {0}")]
    DegenerateRange(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
