use thiserror::Error;

pub type Result<T, E = CsmaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CsmaError {
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),

    #[error("self-loop on link {0}")]
    SelfLoop(usize),

    #[error("index {index} out of range for {len} links")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{what} too large: {size} exceeds cap {cap}")]
    TooLarge {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("invalid parameter `{field}`: {msg}")]
    InvalidParameter { field: String, msg: String },

    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    #[error("chain is reducible: stationary distribution is not unique")]
    Reducible,

    #[error("degenerate variance on link {link}: activity probability is {p}")]
    DegenerateVariance { link: usize, p: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unknown experiment `{name}`; available: {}", .catalog.join(", "))]
    UnknownExperiment {
        name: String,
        catalog: Vec<&'static str>,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CsmaError {
    pub(crate) fn param(field: impl Into<String>, msg: impl Into<String>) -> Self {
        CsmaError::InvalidParameter {
            field: field.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        CsmaError::Config {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// True for errors that stem from a bad configuration rather than a failed run.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            CsmaError::Config { .. }
                | CsmaError::InvalidParameter { .. }
                | CsmaError::UnknownExperiment { .. }
                | CsmaError::Unsupported(_)
                | CsmaError::Reducible
                | CsmaError::DuplicateEdge(..)
                | CsmaError::SelfLoop(_)
                | CsmaError::IndexOutOfRange { .. }
                | CsmaError::TooLarge { .. }
        )
    }
}
