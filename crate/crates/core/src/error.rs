use thiserror::Error;

/// Errors raised anywhere in the cascade pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("128-bit integer overflow while {context}")]
    Overflow { context: String },

    #[error("multiplier search for l_{index} found no admissible value up to {cap}")]
    SearchExhausted { index: usize, cap: u64 },

    #[error("constraint `{constraint}` vanishes for every multiplier at step {index}")]
    Infeasible { index: usize, constraint: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("beta_{index} = |l|^-|l| underflows binary64 (log beta = {log_beta:.3e}); use scaled mode or log-space evaluation")]
    BetaUnderflow { index: usize, log_beta: f64 },

    #[error("plateau of the {kind} group on r_{drive} would be negative ({plateau:.3e}); reduce the beta scale (beta = {beta:.3e})")]
    NegativePlateau {
        kind: &'static str,
        drive: usize,
        beta: f64,
        plateau: f64,
    },

    #[error("grid of {grid} points cannot resolve |l| = {norm:.3}; need at least {required}")]
    UnderResolved {
        grid: usize,
        norm: f64,
        required: usize,
    },

    #[error("real-space potential has imaginary residue {residue:.3e}")]
    NotReal { residue: f64 },

    #[error("step size underflow at t = {t} ({context})")]
    StepUnderflow { t: f64, context: String },

    #[error("singular propagator while inverting block of drive {drive}")]
    Singular { drive: usize },

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit status for this error: 2 for unusable input or
    /// configuration, 3 for a numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) | Error::Io(_) | Error::Json(_) => 2,
            _ => 3,
        }
    }

    pub(crate) fn overflow(context: impl Into<String>) -> Self {
        Error::Overflow {
            context: context.into(),
        }
    }
}
