use thiserror::Error;

use crate::expcalc::VarId;

/// Every failure the engine can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point does not assign variable {0}")]
    InvalidPoint(VarId),

    #[error("capacity exceeded: {0}")]
    CapacityExceeded(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("integral over {0} diverges")]
    DivergentIntegral(VarId),

    #[error("density has zero total mass")]
    DegenerateDensity,

    #[error("unsupported elimination of {var}: {reason}")]
    UnsupportedElimination { var: String, reason: String },

    #[error("equation is not invertible in {0}")]
    NonInvertibleEquation(String),

    #[error("unknown state {state:?} for variable {var}")]
    UnknownState { var: String, state: String },

    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unknown variable {0:?}")]
    UnknownVariable(String),

    #[error("nonlinear expression: {0}")]
    NonlinearExpression(String),

    #[error("invalid join tree: {0}")]
    InvalidJoinTree(String),

    #[error("evidence is inconsistent (probability of evidence is zero)")]
    InconsistentEvidence,

    #[error("oracle cannot integrate {0} free continuous dimensions (max 3)")]
    OracleDimension(usize),

    #[error("invalid model: {0}")]
    InvalidModel(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Stable kebab-case name of the failure family, for machine-readable
    /// diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidPoint(_) => "invalid-point",
            Error::CapacityExceeded(_) => "capacity-exceeded",
            Error::DomainMismatch(_) => "domain-mismatch",
            Error::DivergentIntegral(_) => "divergent-integral",
            Error::DegenerateDensity => "degenerate-density",
            Error::UnsupportedElimination { .. } => "unsupported-elimination",
            Error::NonInvertibleEquation(_) => "non-invertible-equation",
            Error::UnknownState { .. } => "unknown-state",
            Error::Parse { .. } => "parse",
            Error::UnknownVariable(_) => "unknown-variable",
            Error::NonlinearExpression(_) => "nonlinear-expression",
            Error::InvalidJoinTree(_) => "invalid-join-tree",
            Error::InconsistentEvidence => "inconsistent-evidence",
            Error::OracleDimension(_) => "oracle-dimension",
            Error::InvalidModel(_) => "invalid-model",
        }
    }

    /// Whether the failure comes from reading or checking input rather than
    /// from inference itself.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::UnknownVariable(_)
                | Error::UnknownState { .. }
                | Error::NonlinearExpression(_)
                | Error::InvalidJoinTree(_)
                | Error::InvalidModel(_)
        )
    }
}
