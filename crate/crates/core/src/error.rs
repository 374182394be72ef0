use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fibre map is not increasing at x={x}, y={y} (slope {slope})")]
    NonMonotone { x: f64, y: f64, slope: f64 },

    #[error("fixed-point scan cannot separate roots near y={near}; use a finer scan")]
    RefinementNeeded { near: f64 },

    #[error("fibre orbit left the guard interval [{lo}, {hi}] at step {step} (y={y})")]
    FibreEscape { step: usize, y: f64, lo: f64, hi: f64 },

    #[error("period {0} is too large to enumerate")]
    PeriodTooLarge(usize),

    #[error("pullback is not monotone at x={x} (defect {defect}); the anchor lies inside the attractor")]
    AnchorInsideAttractor { x: f64, defect: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: String, iterations: usize },

    #[error("primal and dual dimension estimates differ by {gap} (tolerance {tol})")]
    DualityGap { gap: f64, tol: f64 },

    #[error("stable fibre covers [{lo}, {hi}] but must cover [{need_lo}, {need_hi}]")]
    FibreDomain { lo: f64, hi: f64, need_lo: f64, need_hi: f64 },

    #[error("hypotheses not certified: {0}")]
    HypothesisFailed(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::HypothesisFailed(_) => 2,
            Error::NoConvergence { .. } | Error::DualityGap { .. } | Error::RefinementNeeded { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
