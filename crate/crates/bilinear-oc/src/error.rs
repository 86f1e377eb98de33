//! Error type shared by all solver layers.

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Two objects live on incompatible grids or time grids.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Invalid parameter or an operand whose shape the model cannot accept.
    #[error("configuration error: {0}")]
    Config(String),

    /// A state norm exceeded the divergence guard during integration.
    #[error("divergence at step {step}: state norm {norm:.3e} exceeds {limit:.1e}")]
    Divergence { step: usize, norm: f64, limit: f64 },

    /// The operation is not defined for the given control space or model.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A theorem hypothesis required by the algorithm does not hold.
    #[error("hypothesis not satisfied: {0}")]
    Precondition(String),

    /// Config file syntax or validation failure.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
