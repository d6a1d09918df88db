use thiserror::Error;

/// Errors raised by the model, the solvers and the experiment drivers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid model variant: {0}")]
    InvalidVariant(String),

    #[error("variant {0} is not supported by this solver")]
    UnsupportedVariant(String),

    #[error("negative state component {component}={value}")]
    NegativeState { component: &'static str, value: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("Newton iteration failed to converge: residual {residual:.3e} after {iterations} iterations")]
    NewtonDivergence { residual: f64, iterations: usize },

    #[error("GMRES stalled: relative residual {residual:.3e} after {restarts} restarts")]
    LinearSolveStall { residual: f64, restarts: usize },

    #[error("zero pivot in tridiagonal solve at row {0}")]
    ZeroPivot(usize),

    #[error("step size fell below the minimum {dt_min:e} at t={time}")]
    StepSizeUnderflow { time: f64, dt_min: f64 },

    #[error("no positive interior equilibrium: {0}")]
    NoPositiveEquilibrium(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("sign triple at k^2={k_squared} matches no pattern case")]
    AmbiguousSigns { k_squared: f64 },

    #[error("bracket [{lo}, {hi}] does not straddle the blow-up transition: {reason}")]
    BracketInvalid { lo: f64, hi: f64, reason: String },

    #[error("twin run blew up at t={0}")]
    TwinRunBlowup(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
