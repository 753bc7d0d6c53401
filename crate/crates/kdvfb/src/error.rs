use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("linear solver failure: {0}")]
    SolverFailure(String),

    #[error("fixed-point iteration did not converge in {iterations} iterations (last increment {increment:.3e})")]
    FixedPointDivergence { iterations: usize, increment: f64 },

    #[error("smallness condition violated: input size {size:.3e} exceeds {eta:.3e}")]
    Smallness { size: f64, eta: f64 },

    #[error("length {0} is not critical: the uncontrollable subspace is empty")]
    EmptySubspace(f64),

    #[error("ill-posed steering target: {0}")]
    IllPosedTarget(String),

    #[error("second-order synthesis failed: {0}")]
    Synthesis(String),

    #[error("degenerate target: gain {gain:.3e} is below the minimum {min:.3e}")]
    DegenerateTarget { gain: f64, min: f64 },

    #[error("unsupported length class {0}")]
    UnsupportedClass(String),

    #[error("steering library is invalid: {0}")]
    LibraryInvalid(String),

    #[error("closed loop blew up at t = {t:.6}: {reason}")]
    BlowUp { t: f64, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
