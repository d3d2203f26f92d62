//! Error taxonomy shared by the whole crate.
//!
//! Errors are grouped by how an experiment driver should react to them,
//! and each group maps onto a stable process exit code:
//!
//! * validation problems (bad parameters, malformed configs, degenerate
//!   geometry or statistics) → exit code **2**;
//! * resource limits (state spaces or enumerations that would not fit the
//!   documented capacity) → exit code **3**;
//! * iterative algorithms that failed to reach their tolerance → exit
//!   code **4**.

use std::fmt;

/// A single configuration violation, with a JSON-path-like locator.
///
/// `parse_config` collects *every* violation in a document instead of
/// stopping at the first, so a user can fix a config file in one pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigViolation {
    /// Path string such as `"p"` or `"eta_grid[2]"`.
    pub path: String,
    /// Human-readable description of what is wrong at that path.
    pub message: String,
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at \"{}\": {}", self.path, self.message)
    }
}

fn format_violations(vs: &[ConfigViolation]) -> String {
    vs.iter()
        .map(|v| format!("  - {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// One or more violations found while validating a config document.
    #[error("invalid configuration:\n{}", format_violations(.0))]
    Config(Vec<ConfigViolation>),

    /// The request exceeds a documented enumeration/memory capacity.
    #[error("capacity exceeded: {0}")]
    CapacityExceeded(String),

    /// An iterative solver did not reach its tolerance.
    #[error("convergence failure: {0}")]
    ConvergenceFailure(String),

    /// Geometric input is degenerate (e.g. collinear face vertices).
    #[error("geometric degeneracy: {0}")]
    GeometricDegeneracy(String),

    /// A floating-point computation left the representable range.
    #[error("numeric range: {0}")]
    NumericRange(String),

    /// A statistic cannot be normalized (e.g. zero sample variance).
    #[error("degenerate statistic: {0}")]
    DegenerateStatistic(String),

    /// Underlying I/O failure when reading configs or writing reports.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed JSON encountered before semantic validation.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::CapacityExceeded(_) => 3,
            Error::ConvergenceFailure(_) => 4,
            _ => 2,
        }
    }

    /// Convenience constructor for invalid parameters.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Convenience constructor for capacity errors.
    pub fn capacity(msg: impl Into<String>) -> Self {
        Error::CapacityExceeded(msg.into())
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
