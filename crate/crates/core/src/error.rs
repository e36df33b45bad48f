use thiserror::Error;

/// Errors raised by the solver, diagnostics and harness layers.
#[derive(Debug, Error)]
pub enum SimError {
    /// Invalid parameters or configuration values.
    #[error("configuration error: {0}")]
    Config(String),

    /// Several configuration violations collected in one pass.
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    /// Array length does not match what the basis or grid expects.
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Physical state violates a required invariant (e.g. positivity).
    #[error("invalid state: {0}")]
    State(String),

    /// Non-finite values appeared during time stepping.
    #[error("divergence at step {step} (t = {t:.6e}): {what}")]
    Divergence { step: usize, t: f64, what: String },

    #[error("failed to parse {path}: {message}")]
    Parse { path: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, SimError>;

impl SimError {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Divergence { .. } => 3,
            SimError::Io { .. } => 1,
            _ => 2,
        }
    }
}
