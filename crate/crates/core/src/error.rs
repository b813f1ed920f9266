use alloc::string::String;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("time {t} lies outside the domain [{lo}, {hi}]")]
    Domain { t: f64, lo: f64, hi: f64 },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("non-finite value in layer {layer} during evaluation")]
    NonFiniteActivation { layer: usize },
    #[error("non-finite gradient encountered")]
    NonFiniteGradient,
    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },
    #[error("invalid state: {0}")]
    State(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for failures that stem from numerics (divergence, NaN, singular
    /// systems) rather than from bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular(_)
                | Error::Numerical(_)
                | Error::NonFiniteActivation { .. }
                | Error::NonFiniteGradient
                | Error::TrainingDiverged { .. }
        )
    }
}
