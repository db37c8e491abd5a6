use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh request: {0}")]
    Mesh(String),

    #[error("assembly failed: {0}")]
    Assembly(String),

    #[error("matrix is not SPD: nonpositive pivot {value:e} at index {index}")]
    NotSpd { index: usize, value: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("integer overflow in exact rank computation")]
    RankOverflow,

    #[error("decomposition: {0}")]
    Decomposition(String),

    #[error("partition of unity: {0}")]
    PartitionOfUnity(String),

    #[error("solver diverged: {0}")]
    Divergence(String),

    #[error("check failed: {0}")]
    Assertion(String),

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("problem setup: {0}")]
    Problem(String),

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
