use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid is not compatible with the group lattice: {0}")]
    Lattice(String),

    #[error("time step {dt} exceeds the stability bound {bound}")]
    CflViolation { dt: f64, bound: f64 },

    #[error("non-finite value at grid index {index}")]
    NonFinite { index: usize },

    #[error("box too small: estimated escaping kernel mass {escaping:.3e} exceeds {tolerance:.1e}")]
    BoxTooSmall { escaping: f64, tolerance: f64 },

    #[error("level range too narrow at grid index {index}: V(first) = {first}, V(last) = {last}")]
    Bracket { index: usize, first: f64, last: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("least-squares fit is rank deficient: {0}")]
    RankDeficient(String),

    #[error("malformed field dump: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
