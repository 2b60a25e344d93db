//! Labeled commit graphs with a planted root-cause signal.
//!
//! Each commit has one root-cause deleted line whose text uses tokens from a
//! small signal vocabulary, plus one added line sharing those tokens and
//! linked to the root cause by a data dependency. Every other line draws
//! from a disjoint noise vocabulary. With probability `1 - signal_strength`
//! a commit is corrupted: both signal lines get noise text and the signal
//! edge is dropped.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CommitGraph, Dataset, DepEdge, EdgeKind, LineNode, NodeKind};

pub const SIGNAL_VOCAB: [&str; 6] = [
    "nullguard",
    "offbyone",
    "racecond",
    "leakhandle",
    "overflow",
    "staleref",
];

pub const NOISE_VOCAB: [&str; 40] = [
    "int", "return", "value", "index", "count", "list", "map", "get", "set", "result", "item", "size", "name",
    "config", "buffer", "node", "next", "prev", "data", "key", "flag", "total", "offset", "temp", "input", "output",
    "string", "builder", "append", "format", "log", "debug", "info", "user", "request", "response", "parse", "cache",
    "entry", "state",
];

const TOKENS_PER_LINE: usize = 5;
const SIGNAL_TOKENS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_commits: usize,
    pub deleted_per_commit: usize,
    pub added_per_commit: usize,
    pub edge_density: f64,
    pub signal_strength: f64,
    pub seed: u64,
    /// Root-cause text is noise; the signal survives only through the edge
    /// from the signal-bearing added line.
    #[serde(default)]
    pub structure_only: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_commits: 200,
            deleted_per_commit: 10,
            added_per_commit: 5,
            edge_density: 0.1,
            signal_strength: 1.0,
            seed: 42,
            structure_only: false,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.deleted_per_commit < 2 {
            return bad(format!(
                "deleted_per_commit must be at least 2, got {}",
                self.deleted_per_commit
            ));
        }
        if self.added_per_commit < 1 {
            return bad("added_per_commit must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.edge_density) {
            return bad(format!("edge_density must lie in [0, 1], got {}", self.edge_density));
        }
        if !(0.0..=1.0).contains(&self.signal_strength) {
            return bad(format!(
                "signal_strength must lie in [0, 1], got {}",
                self.signal_strength
            ));
        }
        Ok(())
    }
}

fn line(rng: &mut ChaCha8Rng, signal: &[&str]) -> String {
    let mut toks: Vec<&str> = signal.to_vec();
    while toks.len() < TOKENS_PER_LINE {
        toks.push(NOISE_VOCAB[rng.gen_range(0..NOISE_VOCAB.len())]);
    }
    toks.shuffle(rng);
    toks.join(" ")
}

fn commit(cfg: &GenConfig, i: usize, rng: &mut ChaCha8Rng) -> CommitGraph {
    let (nd, na) = (cfg.deleted_per_commit, cfg.added_per_commit);
    let root = rng.gen_range(0..nd);
    let sig_added = nd + rng.gen_range(0..na);
    let intact = rng.gen::<f64>() < cfg.signal_strength;
    let signal: Vec<&str> = SIGNAL_VOCAB.choose_multiple(rng, SIGNAL_TOKENS).copied().collect();

    let mut nodes = Vec::with_capacity(nd + na);
    for id in 0..nd + na {
        let kind = if id < nd { NodeKind::Deleted } else { NodeKind::Added };
        let carries = intact && ((id == root && !cfg.structure_only) || id == sig_added);
        let text = line(rng, if carries { &signal } else { &[] });
        let node = LineNode::new(id, kind, text);
        nodes.push(if id == root { node.root_cause() } else { node });
    }

    let mut edges = Vec::new();
    if intact {
        edges.push(DepEdge::new(sig_added, root, EdgeKind::DataDependency));
    }
    let plain = &EdgeKind::ALL[..4];
    for s in 0..nd + na {
        if s == sig_added {
            continue;
        }
        for t in 0..nd + na {
            if s == t || !rng.gen_bool(cfg.edge_density) {
                continue;
            }
            let kind = if s < nd && t >= nd {
                *EdgeKind::ALL.choose(rng).unwrap()
            } else {
                *plain.choose(rng).unwrap()
            };
            edges.push(DepEdge::new(s, t, kind));
        }
    }

    CommitGraph {
        commit_id: format!("synthetic-{}-{i:05}", cfg.seed),
        timestamp: Some(1_600_000_000 + 3600 * i as i64),
        nodes,
        edges,
    }
}

pub fn generate(cfg: &GenConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let graphs = (0..cfg.n_commits).map(|i| commit(cfg, i, &mut rng)).collect();
    Ok(Dataset {
        name: format!("synthetic-{}", cfg.seed),
        graphs,
    })
}

/// Number of signal-vocabulary tokens in `text`.
pub fn signal_token_count(text: &str) -> usize {
    crate::embedding::tokenize(text)
        .into_iter()
        .filter(|t| SIGNAL_VOCAB.contains(t))
        .count()
}
