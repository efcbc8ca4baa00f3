use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad model, protocol, partition or experiment configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input violates a precondition (non-Hermitian matrix, T <= 0, ...).
    #[error("validation error: {0}")]
    Validation(String),

    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal residual {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    /// Two instantaneous levels are closer than the degeneracy threshold.
    #[error("degenerate spectrum at s = {s}: min gap {gap:e} <= threshold {threshold:e}; refine the grid or lift the degeneracy")]
    Degeneracy { s: f64, gap: f64, threshold: f64 },

    /// A post-check on an identity that must hold to round-off failed.
    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Validation(_) | Error::Capacity(_) | Error::Io { .. } => 2,
            Error::NoConvergence { .. } | Error::Degeneracy { .. } | Error::Consistency(_) => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
