//! Initial line embeddings.
//!
//! The network consumes one `D`-dimensional vector per line. Vectors come
//! either from the dataset itself (the node's `embedding` field, e.g. exported
//! from a pretrained code model) or from an [`EmbeddingProvider`] applied to
//! the line text.
//!
//! [`HashingEmbedder`] is the built-in provider. Its output is fixed by:
//!
//! * tokens: maximal runs of alphanumeric characters (case preserved);
//! * features: every unigram `u:<tok>` and adjacent bigram `b:<tok1> <tok2>`;
//! * hash: 64-bit FNV-1a keyed with [`HASH_KEY`] over the feature's UTF-8 bytes;
//! * bucket `h % D`, sign `+1` when bit 63 of `h` is clear, else `-1`;
//! * the accumulated vector is scaled to unit Euclidean norm (zero stays zero).

use std::hash::Hasher;

use fnv::FnvHasher;
use rayon::prelude::*;
use rcd_tensor::Matrix;

use crate::error::{Error, Result};
use crate::graph::{CommitGraph, Dataset};

/// FNV-1a initial state used by [`HashingEmbedder`].
pub const HASH_KEY: u64 = 0xcbf2_9ce4_8422_2325 ^ 0x5243_445f_4841_5348;

pub trait EmbeddingProvider: Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Vec<f64>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HashingEmbedder {
    dim: usize,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        Ok(Self { dim })
    }
}

impl EmbeddingProvider for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        embed_hash(text, self.dim)
    }
}

pub fn tokenize(text: &str) -> Vec<&str> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .collect()
}

fn feature_hash(feature: &str) -> u64 {
    let mut h = FnvHasher::with_key(HASH_KEY);
    h.write(feature.as_bytes());
    h.finish()
}

/// Signed feature-hashing embedding of `text`, unit-normalized.
pub fn embed_hash(text: &str, dim: usize) -> Vec<f64> {
    assert!(dim > 0, "embedding dimension must be positive");
    let mut v = vec![0.0; dim];
    let tokens = tokenize(text);
    let mut add = |feature: String| {
        let h = feature_hash(&feature);
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        v[(h % dim as u64) as usize] += sign;
    };
    for t in &tokens {
        add(format!("u:{t}"));
    }
    for pair in tokens.windows(2) {
        add(format!("b:{} {}", pair[0], pair[1]));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

/// A commit graph with its `n×D` matrix of initial line vectors.
#[derive(Clone, Debug)]
pub struct EmbeddedGraph {
    pub graph: CommitGraph,
    pub h0: Matrix,
}

impl EmbeddedGraph {
    pub fn dim(&self) -> usize {
        self.h0.cols()
    }
}

pub fn embed_graph(g: &CommitGraph, provider: &dyn EmbeddingProvider) -> Result<EmbeddedGraph> {
    let dim = provider.dim();
    let mut h0 = Matrix::zeros(g.nodes.len(), dim);
    for (row, node) in g.nodes.iter().enumerate() {
        let err = |reason: String| Error::Embedding {
            commit_id: g.commit_id.clone(),
            node: node.id,
            reason,
        };
        let v = match (&node.embedding, &node.text) {
            (Some(e), _) => {
                if e.len() != dim {
                    return Err(err(format!("embedding has length {}, expected {dim}", e.len())));
                }
                e.clone()
            }
            (None, Some(text)) => provider.embed(text),
            (None, None) => return Err(err("node has neither text nor embedding".into())),
        };
        if v.iter().any(|x| !x.is_finite()) {
            return Err(err("embedding contains non-finite values".into()));
        }
        h0.row_mut(row).copy_from_slice(&v);
    }
    Ok(EmbeddedGraph { graph: g.clone(), h0 })
}

/// Embeds every graph; node order and graph order are preserved.
pub fn embed_dataset(d: &Dataset, provider: &dyn EmbeddingProvider) -> Result<Vec<EmbeddedGraph>> {
    d.graphs.par_iter().map(|g| embed_graph(g, provider)).collect()
}

/// Dimension of the precomputed vectors in `d`, if any node carries one.
pub fn precomputed_dim(d: &Dataset) -> Option<usize> {
    d.graphs
        .iter()
        .flat_map(|g| g.nodes.iter())
        .find_map(|n| n.embedding.as_ref().map(Vec::len))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{LineNode, NodeKind};

    #[test]
    fn empty_text_is_zero() {
        assert_eq!(embed_hash("", 8), vec![0.0; 8]);
        assert_eq!(embed_hash(" ;; ", 8), vec![0.0; 8]);
    }

    #[test]
    fn deterministic_and_unit_norm() {
        assert_eq!(embed_hash("int x = 0;", 16), embed_hash("int x = 0;", 16));
        let v = embed_hash("return a + b;", 32);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tokenizer_splits_on_non_alphanumerics() {
        assert_eq!(tokenize("foo_bar(x1, y);"), vec!["foo", "bar", "x1", "y"]);
    }

    fn graph_with(nodes: Vec<LineNode>) -> CommitGraph {
        CommitGraph {
            commit_id: "g".into(),
            timestamp: None,
            nodes,
            edges: vec![],
        }
    }

    #[test]
    fn precomputed_vectors_pass_through() {
        let mut n0 = LineNode::new(0, NodeKind::Deleted, "ignored").root_cause();
        n0.embedding = Some((0..768).map(|i| i as f64 * 0.5).collect());
        let mut n1 = LineNode::new(1, NodeKind::Added, "x");
        n1.embedding = Some(vec![2.0; 768]);
        let eg = embed_graph(&graph_with(vec![n0.clone(), n1]), &HashingEmbedder::new(768).unwrap()).unwrap();
        assert_eq!(eg.h0.row(0), n0.embedding.as_deref().unwrap());
        assert_eq!(eg.h0.row(1), &[2.0; 768][..]);
    }

    #[test]
    fn wrong_embedding_length_is_error() {
        let mut n0 = LineNode::new(0, NodeKind::Deleted, "x").root_cause();
        n0.embedding = Some(vec![0.0; 767]);
        let err = embed_graph(&graph_with(vec![n0]), &HashingEmbedder::new(768).unwrap()).unwrap_err();
        assert!(err.to_string().contains("767"), "{err}");
    }

    #[test]
    fn missing_text_and_embedding_is_error() {
        let mut n0 = LineNode::new(0, NodeKind::Deleted, "x").root_cause();
        n0.text = None;
        assert!(embed_graph(&graph_with(vec![n0]), &HashingEmbedder::new(4).unwrap()).is_err());
    }

    #[test]
    fn non_finite_precomputed_rejected() {
        let mut n0 = LineNode::new(0, NodeKind::Deleted, "x").root_cause();
        n0.embedding = Some(vec![0.0, f64::NAN]);
        assert!(embed_graph(&graph_with(vec![n0]), &HashingEmbedder::new(2).unwrap()).is_err());
    }

    #[test]
    fn text_rows_match_embed_hash() {
        let g = graph_with(vec![
            LineNode::new(0, NodeKind::Deleted, "a = b;").root_cause(),
            LineNode::new(1, NodeKind::Added, "a = c;"),
        ]);
        let eg = embed_graph(&g, &HashingEmbedder::new(64).unwrap()).unwrap();
        assert_eq!(eg.h0.shape(), (2, 64));
        assert_eq!(eg.h0.row(0), &embed_hash("a = b;", 64)[..]);
        assert_eq!(eg.h0.row(1), &embed_hash("a = c;", 64)[..]);
    }
}
