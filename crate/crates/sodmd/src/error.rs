use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the sodmd library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a precondition (bad dimension, bad range, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A data file could not be parsed. Carries the offending line number
    /// (1-based, counting every line in the file).
    #[error("{}:{line}: {message}", path.display())]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// An operation that needs an initial velocity ran on a trajectory
    /// without one.
    #[error("trajectory `{label}` has no initial velocity; estimate or measure it before fitting")]
    MissingInitialVelocity { label: String },

    /// The training data cannot support a fit (duplicate trajectories,
    /// numerically zero Gram matrix, ...).
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// A numerical routine failed to converge or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The simulated state left the representable range.
    #[error("state diverged at t = {time}")]
    Divergence { time: f64 },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
