use ecodamp::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(CoreError),
    #[error("experiment failure: {0}")]
    Experiment(CoreError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed file: {0}")]
    Format(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// 2 for configuration problems, 3 for solver failures, 4 for brackets
    /// and other experiment-level failures; I/O counts as 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Format(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Experiment(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidParameter { .. }
            | CoreError::InvalidVariant(_)
            | CoreError::UnsupportedVariant(_)
            | CoreError::InvalidGrid(_)
            | CoreError::InvalidArgument(_)
            | CoreError::NegativeState { .. } => CliError::Config(e.to_string()),
            CoreError::NewtonDivergence { .. }
            | CoreError::LinearSolveStall { .. }
            | CoreError::ZeroPivot(_)
            | CoreError::NonFinite(_)
            | CoreError::StepSizeUnderflow { .. } => CliError::Solver(e),
            _ => CliError::Experiment(e),
        }
    }
}
