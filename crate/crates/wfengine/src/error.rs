use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} line {line}: {detail}")]
    Parse {
        what: &'static str,
        line: usize,
        detail: String,
    },
    #[error("invalid DAG: {0}")]
    InvalidDag(String),
    #[error("cycle through task {0}")]
    Cycle(String),
    #[error("empty analysis: {0}")]
    EmptyAnalysis(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no nodes in the pool")]
    NoNodes,
    #[error("worker pool: {0}")]
    WorkerPool(String),
}

pub type Result<T> = std::result::Result<T, Error>;
