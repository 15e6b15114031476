use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("eigensolver failed at index {0}")]
    Eigen(usize),
    #[error("quadrature budget exhausted: last estimates {last:e} and {previous:e}")]
    QuadratureBudget { last: f64, previous: f64 },
    #[error("contours intersect near {0}")]
    ContourIntersection(String),
    #[error("non-normalizable potential: {0}")]
    NonNormalizable(String),
    #[error("{0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
