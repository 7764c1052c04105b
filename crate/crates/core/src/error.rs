use thiserror::Error;

/// Errors raised by model construction, solvers and experiment drivers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarketError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("degenerate instance: {0}")]
    DegenerateInstance(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("market share undefined: no purchases recorded")]
    UndefinedShare,

    #[error("unsupported solver: {0}")]
    UnsupportedSolver(String),

    #[error("size limit exceeded: {what} has {size} items, limit is {limit}")]
    SizeLimit {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("tie-breaking condition violated: {0}")]
    TieBreakingViolation(String),

    #[error("quantity undefined: {0}")]
    Undefined(String),

    #[error("unknown figure id `{0}`")]
    UnknownFigure(String),

    #[error("i/o failure: {0}")]
    Io(String),
}

pub type Result<T, E = MarketError> = std::result::Result<T, E>;

impl From<std::io::Error> for MarketError {
    fn from(err: std::io::Error) -> Self {
        MarketError::Io(err.to_string())
    }
}

impl From<serde_json::Error> for MarketError {
    fn from(err: serde_json::Error) -> Self {
        let msg = err.to_string();
        // Validation failures inside deserialization already carry the prefix.
        let msg = msg.strip_prefix("invalid instance: ").unwrap_or(&msg);
        MarketError::InvalidInstance(msg.to_string())
    }
}

impl From<csv::Error> for MarketError {
    fn from(err: csv::Error) -> Self {
        MarketError::Io(err.to_string())
    }
}
