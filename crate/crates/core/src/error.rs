use thiserror::Error;

use crate::state::StateBin;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown state bin `{0}`")]
    UnknownBin(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("statistic undefined: {0}")]
    UndefinedStatistic(&'static str),

    #[error("selection rule violated: microwave transfer {from:?} -> {dest:?} does not connect N=0 and N=1")]
    SelectionRule { from: StateBin, dest: StateBin },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("fit failed: {message} (residual norm {residual_norm:.3e})")]
    Fit { message: String, residual_norm: f64 },

    #[error("incomplete design: missing batch for {0}")]
    IncompleteDesign(String),

    #[error("parameter override `{key}`: {message}")]
    Override { key: String, message: String },

    #[error(transparent)]
    Parse(#[from] crate::engine::ParseError),

    #[error("run exceeds resource limit: {0}")]
    ResourceLimit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
