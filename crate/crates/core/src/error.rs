use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("sector mismatch: {0}")]
    SectorMismatch(String),
    #[error("operator is not hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),
    #[error("lanczos did not converge: {converged}/{wanted} pairs, worst residual {residual:e}")]
    NotConverged {
        wanted: usize,
        converged: usize,
        residual: f64,
    },
    #[error("one-kink band is not separated: {0}")]
    BandNotSeparated(String),
    #[error("degenerate ground state (gap {0:e})")]
    DegenerateGroundState(f64),
    #[error("singular fit: {0}")]
    Unfittable(String),
    #[error("linear solve failed: {0}")]
    SolveFailed(String),
    #[error("root bracketing failed: {0}")]
    Bracketing(String),
    #[error("dimension {dim} exceeds the limit {limit}")]
    DimensionLimit { dim: usize, limit: usize },
    #[error("design impossible: {0}")]
    DesignImpossible(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
