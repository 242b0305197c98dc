use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A requested value lies outside the achievable range (e.g. inverting a
    /// monotone function outside its image). Carries the achieved bracket.
    #[error("range error: {0}")]
    Range(String),

    /// Invalid configuration of a grid, solver or potential.
    #[error("configuration error: {0}")]
    Config(String),

    /// A quadrature did not reach the requested accuracy.
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    /// The dense symmetric eigensolver failed to converge.
    #[error("eigensolver failed: {0}")]
    Eigen(String),

    /// A linear solve hit a singular matrix.
    #[error("singular matrix: {0}")]
    Singular(String),

    /// The gap iteration exhausted its iteration budget.
    #[error("gap iteration did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        /// Residual after each iteration, for diagnostics.
        history: Vec<f64>,
    },

    /// Failure while reading a tabulated potential.
    #[error("table error (line {line}): {message}")]
    Table { line: usize, message: String },

    /// I/O failure with path context.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
