use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("coordinate {index} = {value} outside box [{lower}, {upper}]")]
    OutOfDomain {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("uncertainty matrix still near-singular after {0} redraws")]
    DegenerateMatrix(usize),

    #[error("numerical failure in {context}: {detail}")]
    NumericalFailure {
        context: &'static str,
        detail: String,
    },

    #[error("subproblem reported {status} where an optimal solution was expected")]
    SubproblemNotOptimal { status: &'static str },

    #[error("line search stalled: step fell below {0:e}")]
    LineSearchStall(f64),

    #[error("degenerate direction: |p - x| = {norm:e} while theta = {theta:e}")]
    DegenerateDirection { norm: f64, theta: f64 },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn numerical(context: &'static str, detail: impl Into<String>) -> Self {
        Error::NumericalFailure {
            context,
            detail: detail.into(),
        }
    }
}
