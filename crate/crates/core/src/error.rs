use thiserror::Error;

/// Errors raised by the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {}", .0.join("; "))]
    InvalidParams(Vec<String>),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("nonpositive {field} at node {node} (value {value:e})")]
    NonPositive {
        field: &'static str,
        node: usize,
        value: f64,
    },

    #[error("non-finite value in {field} at node {node}")]
    NonFinite { field: &'static str, node: usize },

    #[error("CFL violation: dt={dt:e} exceeds limit {limit:e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("Krylov solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    KrylovNonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("Picard iteration stopped contracting in slab {slab} (Gamma history {history:?})")]
    NonContraction { slab: usize, history: Vec<f64> },

    #[error("in Picard iteration {iteration}, inner step {step}: {source}")]
    Step {
        iteration: usize,
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("config violations:\n  {}", .0.join("\n  "))]
    ConfigViolations(Vec<String>),

    #[error("snapshot error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Wraps a sub-step error with its Picard iteration and inner step.
    pub fn at_step(self, iteration: usize, step: usize) -> Self {
        Error::Step {
            iteration,
            step,
            source: Box::new(self),
        }
    }
}
