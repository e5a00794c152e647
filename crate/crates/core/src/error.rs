use thiserror::Error;

/// Errors raised by the simulator and its supporting algebra.
#[derive(Debug, Error)]
pub enum Error {
    /// A closed-form evaluation received an argument outside its domain.
    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    /// A configuration field failed to parse or violates a constraint.
    #[error("invalid config field `{field}`: {msg}")]
    Config { field: String, msg: String },

    /// The implicit step matrix could not be factorised.
    #[error("singular step matrix while integrating ({context})")]
    Singular { context: String },

    /// The divergence guard tripped (|V_PC| grew past the allowed bound).
    #[error("simulation diverged in cycle {cycle}: V_PC = {v_pc:.3} V exceeds {limit:.3} V")]
    Diverged { cycle: usize, v_pc: f64, limit: f64 },

    /// A request referred to a cycle, window or index that does not exist.
    #[error("out of range: {0}")]
    OutOfRange(String),

    /// Damped-sinusoid fitting failed (segment not oscillatory, or no convergence).
    #[error("fit failed: {0}")]
    Fit(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain { op, msg: msg.into() }
    }

    pub(crate) fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            msg: msg.into(),
        }
    }
}
