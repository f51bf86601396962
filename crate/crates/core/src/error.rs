//! Error type shared across the library.
//!
//! Most variants are validation failures (bad files, bad parameters, bad
//! shapes). Two are outcomes a caller may want to branch on rather than
//! report: [`Error::Infeasible`] (no schedule satisfies the constraints) and
//! [`Error::BudgetExhausted`] (the exact solver hit its node budget before
//! proving optimality). [`Error::category`] exposes that split so the CLI can
//! map outcomes to distinct exit codes.

use chrono::NaiveDate;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("day index {day} outside supported calendar range (within {limit} days of 2020-01-01)")]
    DayOutOfRange { day: i64, limit: i64 },

    #[error("invalid seed population {id:?}: {}", violations.join("; "))]
    InvalidPopulation { id: String, violations: Vec<String> },

    #[error("{}{msg}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Parse { line: Option<usize>, msg: String },

    #[error("no rows")]
    NoRows,

    #[error("site {site}: missing day {date} expected")]
    MissingDay { site: u32, date: NaiveDate },

    #[error("{what}: expected {expected} values, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{what} needs at least {needed} days of history, got {got}")]
    InsufficientHistory {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("{0} undefined")]
    MetricUndefined(String),

    #[error("kernel matrix not positive definite even after jitter escalation")]
    SingularKernel,

    #[error("model file rejected: {0}")]
    ModelFormat(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("exact solver node budget exhausted after {nodes} nodes; rerun with a larger budget or the heuristic engine")]
    BudgetExhausted { nodes: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse outcome class, used by the CLI for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad input or bad configuration; rerun with corrected arguments.
    Validation,
    /// The instance admits no schedule under the stated constraints.
    Infeasible,
    /// The exact solver ran out of search budget before finishing.
    Budget,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Infeasible(_) => ErrorCategory::Infeasible,
            Error::BudgetExhausted { .. } => ErrorCategory::Budget,
            _ => ErrorCategory::Validation,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
