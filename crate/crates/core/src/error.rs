use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid has {points} points, above the configured cap of {cap}")]
    GridTooLarge { points: u128, cap: u64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("circulant embedding is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    EmbeddingNotPsd { min_eigenvalue: f64 },

    #[error("covariance matrix is not positive semidefinite after jitter {jitter:e}")]
    NotPsd { jitter: f64 },

    #[error("dense sampler supports at most {max} points, got {points}")]
    TooManyPoints { points: usize, max: usize },

    #[error("ratio estimator diverges: {reason}")]
    DivergenceSuspected { reason: String },

    #[error("spawn cap {cap} reached with residual bound {residual:e}")]
    SpawnCapExceeded { cap: usize, residual: f64 },

    #[error("kernel mass outside the integration box is {tail_mass:e}, above tolerance {tol:e}")]
    NonIntegrable { tail_mass: f64, tol: f64 },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("family check failed at z={z}: {reason}")]
    FamilyInvalid { z: f64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EmbeddingNotPsd { .. }
                | Error::NotPsd { .. }
                | Error::DivergenceSuspected { .. }
                | Error::SpawnCapExceeded { .. }
                | Error::NonIntegrable { .. }
        )
    }
}

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}
