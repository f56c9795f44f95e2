use thiserror::Error;

/// Errors raised by the lab's constructions and suites.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("objects live on different lattices ({left} vs {right})")]
    LatticeMismatch { left: String, right: String },

    #[error("basis mismatch: cannot combine {left} with {right}")]
    BasisMismatch { left: String, right: String },

    #[error("operator dimension {requested} exceeds the configured bound {limit}")]
    ResourceLimit { requested: usize, limit: usize },

    #[error("operator is not flagged self-adjoint")]
    NotSelfAdjoint,

    #[error("translation leaks {leakage:.3e} of its norm outside the truncated basis (threshold {threshold:.3e})")]
    Leakage { leakage: f64, threshold: f64 },

    #[error("quadrature self-convergence {difference:.3e} exceeds {tolerance:.3e}; raise the node count")]
    Quadrature { difference: f64, tolerance: f64 },

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),

    #[error("unsupported request: {0}")]
    Unsupported(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
