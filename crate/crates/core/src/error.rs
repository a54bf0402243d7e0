use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid survey design: {0}")]
    InvalidDesign(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported design shape {shape}: {reason}")]
    UnsupportedShape { shape: String, reason: String },

    #[error("bracket error: {0}")]
    Bracket(String),

    #[error("{what} has {size} members, above the cap of {cap}; {hint}")]
    CapExceeded {
        what: &'static str,
        size: u128,
        cap: u128,
        hint: &'static str,
    },

    #[error("part-worth estimation did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
        last_iterate: Vec<f64>,
    },

    #[error("line {line}: {message}")]
    Record { line: usize, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by input that fails validation, as opposed to
    /// runtime failures (I/O, non-convergence).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidDesign(_)
                | Error::InvalidProfile(_)
                | Error::InvalidInput(_)
                | Error::UnsupportedShape { .. }
                | Error::Record { .. }
                | Error::Json(_)
        )
    }
}
