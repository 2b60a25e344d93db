//! Ranks the deleted lines of a bug-fixing commit by how likely each is to be
//! the root cause of the bug.
//!
//! A commit is a [`CommitGraph`] of deleted and added lines joined by typed
//! dependency edges. Lines are embedded, passed through stacked layers of
//! typed multi-head attention and a gated retention cell, normalized, projected
//! and scored. Training uses a pairwise ranking loss within each commit.
//!
//! ```
//! use rcd_core::{embed_dataset, generate, rank_commit, train, GenConfig, HashingEmbedder, ModelConfig};
//!
//! let ds = generate(&GenConfig { n_commits: 4, deleted_per_commit: 3, added_per_commit: 2, ..GenConfig::default() })?;
//! let graphs = embed_dataset(&ds, &HashingEmbedder::new(8)?)?;
//! let cfg = ModelConfig { dim: 8, heads: 2, layers: 1, out_dim: 4, epochs: 1, ..ModelConfig::default() };
//! let model = train(&graphs, &cfg)?;
//! let ranked = rank_commit(&model, &graphs[0])?;
//! assert_eq!(ranked.len(), 3);
//! # Ok::<(), rcd_core::Error>(())
//! ```

pub mod aggregation;
pub mod checkpoint;
pub mod config;
pub mod diagnostics;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod network;
pub mod params;
pub mod plan;
pub mod ranker;
pub mod synthetic;

pub use config::{Mode, ModelConfig, StepGranularity};
pub use embedding::{embed_dataset, embed_graph, EmbeddedGraph, EmbeddingProvider, HashingEmbedder};
pub use error::{Error, Result};
pub use evaluation::{
    cross_project, cross_validate, evaluate, CommitRanking, CvOptions, CvReport, EvalOptions, EvalReport, MfrMode,
};
pub use graph::{load_dataset, CommitGraph, Dataset, DepEdge, EdgeKind, LabelPolicy, LineNode, NodeKind};
pub use params::NetworkParams;
pub use plan::GraphPlan;
pub use ranker::{rank_commit, train, train_with_progress, TrainedModel};
pub use synthetic::{generate, GenConfig};
