use std::fmt;

use thiserror::Error;

/// Linear block of the truncated amplitude equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    OnePhoton,
    TwoPhoton,
    /// Denominators of the closed-form coefficients.
    ClosedForm,
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Block::OnePhoton => f.write_str("one-photon"),
            Block::TwoPhoton => f.write_str("two-photon"),
            Block::ClosedForm => f.write_str("closed-form"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid photon-number cutoff {0} (must be at least 1)")]
    InvalidCutoff(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not Hermitian (max |A - A^dagger| = {0:e})")]
    NotHermitian(f64),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("resonance singularity in the {0} block")]
    ResonanceSingularity(Block),

    #[error("g2 undefined: cavity {0} has no one-photon amplitude")]
    UndefinedCorrelation(u8),

    #[error("superoperator dimension {0} exceeds 10^4; pass the large-dimension override")]
    DimensionOverflow(usize),

    #[error("steady state is not unique (null space dimension {0})")]
    NonUniqueSteadyState(usize),

    #[error("Liouvillian constraint system is singular")]
    SingularLiouvillian,

    #[error("steady state violates physicality: {0}")]
    Unphysical(String),

    #[error("time step {dt:e} exceeds stability bound {bound:e}")]
    StepTooLarge { dt: f64, bound: f64 },

    #[error("integration unstable at t = {time:e}: trace drift {drift:e}")]
    IntegrationUnstable { time: f64, drift: f64 },

    #[error("cavity {0} is empty (mean photon number underflows)")]
    EmptyMode(u8),

    #[error("invalid search grid: {0}")]
    InvalidGrid(String),

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("unknown figure id {0:?}")]
    UnknownFigure(String),

    #[error("malformed density-matrix dump: {0}")]
    BadDump(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short stable code used in sweep sentinels (`err:<code>`).
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidCutoff(_) => "cutoff",
            Error::DimensionMismatch { .. } => "dim",
            Error::NotHermitian(_) => "hermitian",
            Error::InvalidParams(_) => "params",
            Error::ResonanceSingularity(_) => "resonance",
            Error::UndefinedCorrelation(_) => "undefined",
            Error::DimensionOverflow(_) => "overflow",
            Error::NonUniqueSteadyState(_) => "nonunique",
            Error::SingularLiouvillian => "singular",
            Error::Unphysical(_) => "unphysical",
            Error::StepTooLarge { .. } => "step",
            Error::IntegrationUnstable { .. } => "unstable",
            Error::EmptyMode(_) => "empty",
            Error::InvalidGrid(_) => "grid",
            Error::InvalidSweep(_) => "sweep",
            Error::UnknownFigure(_) => "figure",
            Error::BadDump(_) => "dump",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    /// Whether the error came from a numerical solver rather than from input validation.
    pub fn is_solver_error(&self) -> bool {
        matches!(
            self,
            Error::ResonanceSingularity(_)
                | Error::UndefinedCorrelation(_)
                | Error::NonUniqueSteadyState(_)
                | Error::SingularLiouvillian
                | Error::Unphysical(_)
                | Error::IntegrationUnstable { .. }
                | Error::EmptyMode(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
