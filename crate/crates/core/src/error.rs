use thiserror::Error;

/// Errors raised by the DCMA library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DcmaError {
    #[error("invalid system parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("value {value} outside domain {domain}")]
    Domain { value: f64, domain: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("window overflow: signal extends to {needed:.4e} s but window is {window:.4e} s")]
    WindowOverflow { needed: f64, window: f64 },

    #[error("zero variance: statistic undefined")]
    ZeroVariance,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("insufficient trials: {0}")]
    InsufficientTrials(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl DcmaError {
    /// True for failures of the numerical model rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            DcmaError::WindowOverflow { .. }
                | DcmaError::ZeroVariance
                | DcmaError::InsufficientTrials(_)
                | DcmaError::GridMismatch(_)
        )
    }
}

impl From<std::io::Error> for DcmaError {
    fn from(e: std::io::Error) -> Self {
        DcmaError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for DcmaError {
    fn from(e: serde_json::Error) -> Self {
        DcmaError::Serde(e.to_string())
    }
}

impl From<csv::Error> for DcmaError {
    fn from(e: csv::Error) -> Self {
        DcmaError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, DcmaError>;
