use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// `theta_i = 0` puts the cubic root on the boundary of the dual feasible set.
    #[error("degenerate theta = 0: the cubic root sigma = 0 lies on the dual boundary")]
    DegenerateTheta,

    #[error("dual point is outside the feasible set: {0}")]
    DualBoundary(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("shifted interaction matrix has rank zero; use the linear solver")]
    RankZero,

    #[error("instance too large for exhaustive enumeration: n = {n} exceeds {max}")]
    TooLarge { n: usize, max: usize },

    #[error("non-integer data: {0}")]
    NonInteger(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
