use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no particles left after discarding weights <= {weight_floor}")]
    EmptyEnsemble { weight_floor: f64 },

    #[error("numerical domain error at grid cell {cell}: {detail}")]
    NumericalDomain { cell: usize, detail: String },

    #[error("fixed-point iteration did not converge in {iterations} sweeps (last residual {:e})", residual_history.last().copied().unwrap_or(f64::NAN))]
    NonConvergence {
        iterations: usize,
        residual_history: Vec<f64>,
    },

    #[error("solver failed at step {step}: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
