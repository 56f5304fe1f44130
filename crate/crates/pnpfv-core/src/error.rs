use thiserror::Error;

/// Errors produced by grid construction, scenario validation, assembly,
/// linear solves, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("expression error: {0}")]
    Expr(String),

    #[error("non-finite value for {what} at cell {cell:?}")]
    NonFinite { what: String, cell: [usize; 3] },

    #[error("negative {what} at cell {cell:?}: {value}")]
    Negative {
        what: String,
        cell: [usize; 3],
        value: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("linear solver did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    SolverStagnated { iterations: usize, residual: f64 },

    #[error("linear solver breakdown: {0}")]
    SolverBreakdown(String),

    #[error("incompatible source for the pure-Neumann potential problem: |weighted sum| = {imbalance:.3e} exceeds {bound:.3e}")]
    IncompatibleSource { imbalance: f64, bound: f64 },

    #[error("limiter failed: {0}")]
    Limiter(String),

    #[error("steady-state iteration exceeded {max_steps} steps (last residual {residual:.3e})")]
    SteadyStateNotReached { max_steps: usize, residual: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
