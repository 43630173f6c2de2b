//! Error type shared across the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong in this crate.
///
/// Numerical routines distinguish bad inputs (caller bugs), iterations that
/// ran out of budget (carrying their best iterate so callers can decide
/// whether the partial answer is usable), and genuine floating-point
/// breakdown. I/O and format errors come from the kernel-file reader.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An iterative solver exhausted its iteration budget.
    #[error("no convergence after {iterations} iterations: last iterate {last:.17e}, residual {residual:.3e}")]
    NonConvergence {
        /// Best iterate when the budget ran out.
        last: f64,
        /// Fixed-point residual at that iterate.
        residual: f64,
        /// Number of iterations performed.
        iterations: usize,
    },

    /// A bisection bracket did not contain a sign change.
    #[error("no sign change in bracket [{lo}, {hi}]")]
    BracketFailure {
        /// Lower bracket endpoint.
        lo: f64,
        /// Upper bracket endpoint.
        hi: f64,
    },

    /// A computation produced a non-finite value.
    #[error("numeric overflow: {0}")]
    NumericOverflow(String),

    /// A kernel file (or other on-disk payload) is malformed.
    #[error("format error: {0}")]
    Format(String),

    /// An underlying I/O operation failed.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
