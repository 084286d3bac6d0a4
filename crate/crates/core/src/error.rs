use thiserror::Error;

/// Errors produced by graph construction, training and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("vertex {vertex} out of range for a graph with {n_vertices} vertices")]
    InvalidVertex { vertex: usize, n_vertices: usize },

    #[error("self-loop on vertex {0}")]
    SelfLoop(usize),

    #[error("duplicate edge between vertices {0} and {1}")]
    DuplicateEdge(usize, usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite gradient for parameter {index}")]
    NonFiniteGradient { index: usize },

    #[error("training diverged at step {step}: objective {value}")]
    Diverged { step: usize, value: f64 },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("graph file: {0}")]
    Format(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
