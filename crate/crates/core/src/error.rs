use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{what} requires dimension {required}, above the configured cap {cap}")]
    CapExceeded { what: &'static str, required: u128, cap: usize },
    #[error("singular or ill-conditioned matrix: {0}")]
    Singular(String),
    #[error("did not converge: {0}")]
    Convergence(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("negative eigenvalue {0:e} below the clipping tolerance")]
    NegativeEigenvalue(f64),
    #[error("no rational p/q with q <= {max_den} within {tol:e} of {value}")]
    NoRational { value: f64, max_den: u64, tol: f64 },
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("malformed MPS file: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Whether the failure stems from a resource cap rather than bad input.
    pub fn is_cap(&self) -> bool {
        matches!(self, Error::CapExceeded { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_cap(what: &'static str, base: usize, exp: usize, cap: usize) -> Result<usize> {
    let required = (base as u128).checked_pow(exp as u32).unwrap_or(u128::MAX);
    if required > cap as u128 {
        return Err(Error::CapExceeded { what, required, cap });
    }
    Ok(required as usize)
}
