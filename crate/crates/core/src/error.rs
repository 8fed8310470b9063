use std::fmt;

use thiserror::Error;

/// Which structural constraint a validation failure refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    Square,
    Hermitian,
    Trace,
    PositiveSemidefinite,
    PovmCompleteness,
    KrausCompleteness,
    Probability,
    Grid,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Constraint::Square => "squareness",
            Constraint::Hermitian => "hermiticity",
            Constraint::Trace => "unit trace",
            Constraint::PositiveSemidefinite => "positive semidefiniteness",
            Constraint::PovmCompleteness => "POVM completeness",
            Constraint::KrausCompleteness => "Kraus completeness",
            Constraint::Probability => "probability normalisation",
            Constraint::Grid => "quantisation grid membership",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{constraint} violated by {magnitude:.3e}")]
    Validation {
        constraint: Constraint,
        magnitude: f64,
    },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("invalid parameter: {0}")]
    Domain(String),

    #[error("budget {epsilon} exceeds the closed-form limit {limit}; use the numerical solver")]
    Infeasible { epsilon: f64, limit: f64 },

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("did not converge: {0}")]
    NotConverged(String),

    #[error("adversary strengths are undetermined; no mismatch interval is available")]
    CannotBound,
}

impl Error {
    pub(crate) fn validation(constraint: Constraint, magnitude: f64) -> Self {
        Error::Validation {
            constraint,
            magnitude,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
