use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("node {node} has zero degree")]
    IsolatedNode { node: usize },

    #[error(
        "exact window transition needs {n_nodes}x{n_nodes} dense rows, above the cap of {cap} nodes; \
         use the block approximation instead"
    )]
    MemoryCap { n_nodes: usize, cap: usize },

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
