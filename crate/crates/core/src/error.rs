use thiserror::Error;

/// Errors raised by the simulation and inference routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("covariance is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("Fock truncation at dim {dim} leaks {leakage:e} into the top levels (limit {limit:e})")]
    Truncation { dim: usize, leakage: f64, limit: f64 },

    #[error("phase-space grid misses part of the state: marginal tail mass {tail:e}")]
    GridSupport { tail: f64 },

    #[error("step-doubling check failed: change {change:e} exceeds {tolerance:e}")]
    Convergence { change: f64, tolerance: f64 },

    #[error("{escaped} of {total} trajectories are not bound by the quartic potential")]
    TrajectoryEscape { escaped: usize, total: usize },

    #[error("backend mismatch: {0}")]
    BackendMismatch(String),

    #[error("sample time {time:e} s outside the sequence span [0, {span:e}] s")]
    TimeOutOfRange { time: f64, span: f64 },

    #[error("fringe fit failed: {0}")]
    FitFailure(String),

    #[error("degenerate fringe scan: {0}")]
    DegenerateScan(String),

    #[error("model visibility {value:e} at t = {time:e} s is inside a node region")]
    NodeRegion { time: f64, value: f64 },

    #[error("insufficient k-space coverage: {0}")]
    Coverage(String),

    #[error("characteristic-function samples violate Hermitian symmetry by {deviation:e}")]
    NonHermitian { deviation: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}

/// Reject non-finite or non-positive values.
pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {value}")))
    }
}

pub(crate) fn require_non_negative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and >= 0, got {value}")))
    }
}
