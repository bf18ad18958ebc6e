use thiserror::Error;

use crate::linsolve::SolveReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid refinement ratio k = {0} (two-grid needs k >= 2)")]
    InvalidRatio(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("history length {found} does not match weight row level {expected}")]
    History { expected: usize, found: usize },

    #[error("operator is not positive definite: min(sigma - D) = {min_margin:e}")]
    IndefiniteOperator { min_margin: f64 },

    #[error(
        "linear solve did not converge after {} iterations (relative residual {:e})",
        .0.iterations,
        .0.relative_residual
    )]
    LinearNonConvergence(SolveReport),

    #[error("Picard iteration did not converge after {iterations} iterations (last increment {last_increment:e})")]
    PicardNonConvergence {
        iterations: usize,
        last_increment: f64,
    },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("convergence rate undefined for errors ({coarse:e}, {fine:e})")]
    UndefinedRate { coarse: f64, fine: f64 },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("at time level {level}: {source}")]
    AtLevel {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("at ladder level {level}: {source}")]
    AtLadderLevel {
        level: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_level(self, level: usize) -> Self {
        Error::AtLevel {
            level,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_ladder_level(self, level: usize) -> Self {
        Error::AtLadderLevel {
            level,
            source: Box::new(self),
        }
    }

    /// Innermost error, with level annotations peeled off.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtLevel { source, .. } | Error::AtLadderLevel { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the numerics (non-convergence, loss of
    /// definiteness) as opposed to invalid input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self.root(),
            Error::IndefiniteOperator { .. }
                | Error::LinearNonConvergence(_)
                | Error::PicardNonConvergence { .. }
        )
    }
}
