use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("Fock truncation must keep at least one excited level (n_max >= 1), got {0}")]
    InvalidFockDim(usize),

    #[error("path needs at least 2 samples, got {0}")]
    DegeneratePath(usize),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParams { name: &'static str, reason: String },

    #[error("step halving changed the final state by {estimate:.3e} (tolerance {tol:.3e})")]
    NonConvergence { estimate: f64, tol: f64 },

    #[error("norm/trace drifted by {drift:.3e} during propagation")]
    NormDrift { drift: f64 },

    #[error("state does not match the propagation space: {0}")]
    StateMismatch(String),

    #[error("phase of row {row} is ill-defined: |overlap| = {overlap:.3e} < 0.5")]
    AmbiguousPhase { row: &'static str, overlap: f64 },

    #[error("malformed path CSV at line {line}: {reason}")]
    PathCsv { line: usize, reason: String },
}

impl Error {
    /// Short machine-friendly name, used in sweep failure rows.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidFockDim(_) => "InvalidFockDim",
            Error::DegeneratePath(_) => "DegeneratePath",
            Error::NonFinite(_) => "NonFiniteValue",
            Error::InvalidParams { .. } => "InvalidParams",
            Error::NonConvergence { .. } => "NonConvergence",
            Error::NormDrift { .. } => "NormDrift",
            Error::StateMismatch(_) => "StateMismatch",
            Error::AmbiguousPhase { .. } => "AmbiguousPhase",
            Error::PathCsv { .. } => "PathCsv",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
