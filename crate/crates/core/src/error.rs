use std::path::PathBuf;

/// Errors produced by the sparc-core library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dictionary validation failed: {0}")]
    Validation(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("search space of {size} codewords exceeds the limit of {limit}")]
    SearchSpaceTooLarge { size: u128, limit: u128 },

    #[error("AMP diverged at iteration {iteration}: tau^2 = {tau_sq:.3e} (initial {initial:.3e})")]
    Divergence {
        iteration: usize,
        tau_sq: f64,
        initial: f64,
    },

    #[error("quadrature did not converge: {points} vs {refined} points differ by {delta:.3e}")]
    QuadratureNotConverged {
        points: usize,
        refined: usize,
        delta: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerical guards (AMP divergence, quadrature refinement).
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. } | Error::QuadratureNotConverged { .. }
        )
    }

    /// True for errors caused by user-provided configuration or input files.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::Validation(_)
                | Error::Parse { .. }
                | Error::Config(_)
                | Error::SearchSpaceTooLarge { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
