use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("semantic error: {0}")]
    Semantic(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("statistics mode error: {0}")]
    Mode(String),
    #[error("size limit exceeded: {0}")]
    Size(String),
    #[error("oracle guard exceeded: {0}")]
    Guard(String),
    #[error("plan error: {0}")]
    Plan(String),
    #[error("certificate error: {0}")]
    Certificate(String),
    #[error("statistics do not match certificate: {0}")]
    StatsMismatch(String),
    #[error("bound is unbounded: {0}")]
    Unbounded(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error("data error in {path}: {message}")]
    Data { path: PathBuf, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
