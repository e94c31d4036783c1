//! Crate-wide error type.
//!
//! Every fallible operation in the crate returns [`Result`]. Numerical
//! routines never panic on bad input and never return NaN silently: they
//! either produce a finite value or a structured error describing which
//! contract was violated.

use thiserror::Error;

/// Errors produced by the statistical routines, the trial model and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    /// An input was outside the mathematical domain of the operation
    /// (non-finite argument, non-positive scale, probability outside (0,1), ...).
    #[error("domain error in {op}: {reason}")]
    Domain {
        /// Name of the offending operation.
        op: &'static str,
        /// Human-readable description of the violated precondition.
        reason: String,
    },

    /// A truncated-normal moment was requested on an interval whose
    /// probability mass underflows (Φ(β) − Φ(α) < 1e-300).
    #[error("degenerate truncation: interval [{lower}, {upper}] carries no representable mass")]
    DegenerateTruncation { lower: f64, upper: f64 },

    /// A conditional quantity was requested given an event whose probability
    /// underflows (for example a posterior normalizer below 1e-300).
    #[error("degenerate conditioning in {op}: event probability underflows ({value:e})")]
    DegenerateConditioning { op: &'static str, value: f64 },

    /// An iterative routine exhausted its budget before reaching the
    /// requested accuracy. `best` is the last iterate, `error_estimate` the
    /// routine's own accuracy estimate at that point.
    #[error("{op} did not reach tolerance {tolerance:e} within budget ({evaluations} evaluations); best estimate {best:e} with error estimate {error_estimate:e}")]
    Accuracy {
        op: &'static str,
        best: f64,
        error_estimate: f64,
        tolerance: f64,
        evaluations: u64,
    },

    /// Data are impossible under the stated design (zero likelihood),
    /// e.g. a second-stage sample recorded for a stopped trial.
    #[error("data inconsistent with design: {0}")]
    InconsistentData(String),

    /// The requested estimator branch exists mathematically but is not
    /// exposed (the bias-corrected estimator after stopping).
    #[error("unsupported branch: {0}")]
    UnsupportedBranch(String),

    /// An input failed a precondition that is not a plain domain error
    /// (for example the empirical-Bayes slope at ȳ = 0).
    #[error("unsupported input for {op}: {reason}")]
    UnsupportedInput { op: &'static str, reason: String },

    /// A conditioned calibration run retained no replicates within budget.
    #[error("empty selection: {0}")]
    EmptySelection(String),

    /// Malformed data or configuration text.
    #[error("parse error in {context}: {reason}")]
    Parse { context: String, reason: String },

    /// Invalid run configuration (CLI flags / config file).
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Report serialization failure.
    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl Error {
    /// Convenience constructor for [`Error::Domain`].
    pub fn domain(op: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            op,
            reason: reason.into(),
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
