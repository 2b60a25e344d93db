//! Shared fixtures and loop-based reference implementations.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rcd_core::graph::{CommitGraph, DepEdge, EdgeKind, LineNode, NodeKind};
use rcd_core::params::{prior_index, GruParams, HgtLayerParams, NetworkParams};
use rcd_core::ModelConfig;
use rcd_tensor::Matrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Valid graph with `2..=max_nodes` nodes, random kinds and edges.
/// Node 0 is always a deleted root cause.
pub fn random_graph(rng: &mut impl Rng, max_nodes: usize, density: f64) -> CommitGraph {
    let n = rng.gen_range(2..=max_nodes);
    let nodes: Vec<LineNode> = (0..n)
        .map(|id| {
            let kind = if id == 0 || rng.gen_bool(0.6) {
                NodeKind::Deleted
            } else {
                NodeKind::Added
            };
            let mut node = LineNode::new(id, kind, format!("line {id} token{}", rng.gen_range(0..5)));
            if id == 0 {
                node = node.root_cause();
            }
            node
        })
        .collect();
    let mut edges = Vec::new();
    for s in 0..n {
        for t in 0..n {
            if s == t {
                continue;
            }
            for kind in EdgeKind::ALL {
                let allowed = kind != EdgeKind::LineMapping
                    || (nodes[s].kind == NodeKind::Deleted && nodes[t].kind == NodeKind::Added);
                if allowed && rng.gen_bool(density) {
                    edges.push(DepEdge::new(s, t, kind));
                }
            }
        }
    }
    CommitGraph {
        commit_id: format!("random-{}", rng.gen::<u32>()),
        timestamp: None,
        nodes,
        edges,
    }
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, bound: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// Seeded initialization with every entry jittered, so biases and priors are non-trivial.
pub fn random_params(cfg: &ModelConfig, rng: &mut impl Rng) -> NetworkParams<Matrix> {
    let mut p = NetworkParams::init(cfg, rng);
    for m in p.fields_mut() {
        for v in m.data_mut() {
            *v += rng.gen_range(-0.3..0.3);
        }
    }
    p
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `W x + b` for weight `out×in`.
fn linear(w: &Matrix, b: &Matrix, x: &[f64]) -> Vec<f64> {
    (0..w.rows()).map(|o| dot(w.row(o), x) + b.data()[o]).collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Reference aggregation: per target, per head, softmax over incoming edges.
pub fn naive_hgt(g: &CommitGraph, h: &Matrix, p: &HgtLayerParams<Matrix>) -> Matrix {
    let (n, d) = (h.rows(), h.cols());
    let dh = d / p.heads;
    let kind = |u: usize| g.nodes[u].kind.ordinal();
    let k: Vec<Vec<f64>> = (0..n)
        .map(|u| linear(&p.k_w[kind(u)], &p.k_b[kind(u)], h.row(u)))
        .collect();
    let q: Vec<Vec<f64>> = (0..n)
        .map(|u| linear(&p.q_w[kind(u)], &p.q_b[kind(u)], h.row(u)))
        .collect();
    let v: Vec<Vec<f64>> = (0..n)
        .map(|u| linear(&p.v_w[kind(u)], &p.v_b[kind(u)], h.row(u)))
        .collect();

    let mut out = Matrix::zeros(n, d);
    for t in 0..n {
        let incoming: Vec<&DepEdge> = g.edges.iter().filter(|e| e.dst == t).collect();
        if incoming.is_empty() {
            continue;
        }
        for i in 0..p.heads {
            let slice = i * dh..(i + 1) * dh;
            let logits: Vec<f64> = incoming
                .iter()
                .map(|e| {
                    let w = p.att(e.kind, i);
                    let ks = &k[e.src][slice.clone()];
                    let qt = &q[t][slice.clone()];
                    let mut acc = 0.0;
                    for a in 0..dh {
                        for b in 0..dh {
                            acc += ks[a] * w.get(a, b) * qt[b];
                        }
                    }
                    let mu = p.mu.data()[prior_index(g.nodes[e.src].kind, e.kind, g.nodes[t].kind)];
                    acc * mu / (dh as f64).sqrt()
                })
                .collect();
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            for (e, ex) in incoming.iter().zip(&exps) {
                let w = p.msg(e.kind, i);
                let vs = &v[e.src][slice.clone()];
                for b in 0..dh {
                    let m: f64 = (0..dh).map(|a| vs[a] * w.get(a, b)).sum();
                    let cur = out.get(t, i * dh + b);
                    out.set(t, i * dh + b, cur + ex / z * m);
                }
            }
        }
    }
    out
}

/// Reference gated update in the textbook `(1 - z) n + z h` form.
pub fn naive_gru(x: &Matrix, h: &Matrix, p: &GruParams<Matrix>) -> Matrix {
    let mut out = Matrix::zeros(h.rows(), h.cols());
    for u in 0..h.rows() {
        let (xu, hu) = (x.row(u), h.row(u));
        let add = |a: Vec<f64>, b: Vec<f64>| a.into_iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>();
        let r: Vec<f64> = add(linear(&p.w_ir, &p.b_ir, xu), linear(&p.w_hr, &p.b_hr, hu))
            .into_iter()
            .map(sigmoid)
            .collect();
        let z: Vec<f64> = add(linear(&p.w_iz, &p.b_iz, xu), linear(&p.w_hz, &p.b_hz, hu))
            .into_iter()
            .map(sigmoid)
            .collect();
        let xn = linear(&p.w_in, &p.b_in, xu);
        let hn = linear(&p.w_hn, &p.b_hn, hu);
        for c in 0..h.cols() {
            let nc = (xn[c] + r[c] * hn[c]).tanh();
            out.set(u, c, (1.0 - z[c]) * nc + z[c] * hu[c]);
        }
    }
    out
}

pub fn small_cfg(dim: usize, heads: usize, layers: usize) -> ModelConfig {
    ModelConfig {
        dim,
        heads,
        layers,
        out_dim: 4,
        ..ModelConfig::default()
    }
}
