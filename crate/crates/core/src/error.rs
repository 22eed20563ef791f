use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degrees of freedom must be positive")]
    ZeroDegreesOfFreedom,
    #[error("matrix must be square with even size 2n, got {rows}x{cols}")]
    BadShape { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("matrix is not symplectic: residual {residual:.3e} exceeds {tol:.3e}")]
    NotSymplectic { residual: f64, tol: f64 },
    #[error("matrix is not in sp(2n): J*A asymmetry {residual:.3e} exceeds {tol:.3e}")]
    NotHamiltonian { residual: f64, tol: f64 },
    #[error("hamiltonian is not positive definite")]
    NotPositiveDefinite,
    #[error("not strongly stable: {0}")]
    NotStronglyStable(String),
    #[error("not stable: {0}")]
    NotStable(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("eigensolver did not converge")]
    NoConvergence,
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("malformed input: {0}")]
    Format(String),
}

impl Error {
    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NoConvergence | Error::Numerical(_))
    }
}
