use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid needs at least 2 subintervals, got {0}")]
    GridTooCoarse(usize),

    #[error("expected {expected} grid values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("grid functions live on different grids ({left} vs {right} subintervals)")]
    GridMismatch { left: usize, right: usize },

    #[error("sample path must start at 0, got {0}")]
    PathNotPinned(f64),

    #[error("shift direction must vanish at t = 0, got {0}")]
    ShiftNotPinned(f64),

    #[error("argument ({t}, {s}) outside [0, 1]^2")]
    OutOfDomain { t: f64, s: f64 },

    #[error("non-finite value {value} from the nonlinearity at t = {t}, x = {x}, y = {y}")]
    NonFinite { t: f64, x: f64, y: f64, value: f64 },

    #[error(
        "linearized problem is resonant at iteration {iteration} (condition estimate {rcond:e})"
    )]
    ResonantIterate { iteration: usize, rcond: f64 },

    #[error("linear system is numerically singular (smallest singular value {sigma_min:e})")]
    SingularSystem { sigma_min: f64 },

    #[error("operator I + L is not invertible: u2(1) = {margin:e}")]
    ResonantOperator { margin: f64 },

    #[error("eigen-solver failed: {0}")]
    EigenFailure(String),

    #[error("overflow while integrating the fundamental solutions at t = {0}")]
    ShootingOverflow(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("nonlinearity {0} does not declare a bound on |f|")]
    MissingBound(String),
}

pub type Result<T> = std::result::Result<T, Error>;
