use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "variance profile is not {shape}: midpoint test fails at s={s}, t={t}, midpoint={midpoint}"
    )]
    ShapeViolation {
        shape: &'static str,
        s: f64,
        t: f64,
        midpoint: f64,
    },

    #[error("quadrature did not converge: estimate {estimate}, error estimate {error_estimate}")]
    Quadrature { estimate: f64, error_estimate: f64 },

    #[error(
        "circulant embedding failed for n={n_steps}: most negative eigenvalue {min_eigenvalue}"
    )]
    Embedding { n_steps: usize, min_eigenvalue: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("mode mismatch: {0}")]
    ModeMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
