use std::path::PathBuf;

use rcd_tensor::TensorError;
use thiserror::Error;

use crate::graph::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema violation{}: {reason}", commit_suffix(.commit_id))]
    Schema { commit_id: Option<String>, reason: String },
    #[error("commit {commit_id}: {}", join_violations(.violations))]
    InvalidGraph {
        commit_id: String,
        violations: Vec<Violation>,
    },
    #[error("duplicate commit_id {0}")]
    DuplicateCommit(String),
    #[error("commit {commit_id}: unknown node {node}")]
    UnknownNode { commit_id: String, node: usize },
    #[error("commit {commit_id}, node {node}: {reason}")]
    Embedding {
        commit_id: String,
        node: usize,
        reason: String,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("non-finite loss at epoch {epoch}, commit {commit_id}")]
    NonFiniteLoss { epoch: usize, commit_id: String },
    #[error("evaluation: {0}")]
    Evaluation(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

fn commit_suffix(id: &Option<String>) -> String {
    id.as_ref().map(|c| format!(" in commit {c}")).unwrap_or_default()
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
