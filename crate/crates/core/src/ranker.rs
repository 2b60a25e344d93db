//! Pairwise (RankNet) training and inference over deleted lines.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rcd_tensor::{sigmoid, Matrix, Tape, TensorError, Var};

use crate::config::{ModelConfig, StepGranularity};
use crate::embedding::EmbeddedGraph;
use crate::error::{Error, Result};
use crate::graph::{CommitGraph, NodeKind};
use crate::network::{check_input_dim, network_forward};
use crate::params::NetworkParams;
use crate::plan::GraphPlan;

/// Probabilities are clamped to `[LOG_FLOOR, 1 - LOG_FLOOR]` before the log.
pub const LOG_FLOOR: f64 = 1e-12;

/// `scorer_w · a + scorer_b` for one task embedding.
pub fn score(a: &[f64], scorer_w: &[f64], scorer_b: f64) -> f64 {
    a.iter().zip(scorer_w).map(|(x, w)| x * w).sum::<f64>() + scorer_b
}

/// Probability that line `i` ranks above line `j`.
pub fn pair_probability(s_i: f64, s_j: f64, sigma: f64) -> f64 {
    sigmoid(sigma * (s_i - s_j))
}

/// Target probability: 1 if only `i` is a root cause, 0 if only `j` is, else 0.5.
pub fn pair_label(g: &CommitGraph, i: usize, j: usize) -> Result<f64> {
    let mut flags = [false; 2];
    for (slot, id) in [i, j].into_iter().enumerate() {
        let node = g.nodes.get(id).ok_or_else(|| Error::UnknownNode {
            commit_id: g.commit_id.clone(),
            node: id,
        })?;
        if node.kind != NodeKind::Deleted {
            return Err(Error::Config(format!(
                "commit {}: pair member {id} is not a deleted line",
                g.commit_id
            )));
        }
        flags[slot] = node.is_root_cause;
    }
    Ok(match flags {
        [true, false] => 1.0,
        [false, true] => 0.0,
        _ => 0.5,
    })
}

/// Cross-entropy between target `p_bar` and predicted `p`.
pub fn pairwise_loss(p: f64, p_bar: f64) -> f64 {
    let p = p.clamp(LOG_FLOOR, 1.0 - LOG_FLOOR);
    -p_bar * p.ln() - (1.0 - p_bar) * (1.0 - p).ln()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairSample {
    pub commit_id: String,
    pub i: usize,
    pub j: usize,
    pub label: f64,
}

/// Every unordered pair of deleted lines, `i < j`, ascending. Tie pairs
/// (label 0.5) only when `include_ties`.
pub fn build_pairs(g: &CommitGraph, include_ties: bool) -> Vec<PairSample> {
    let deleted: Vec<usize> = g.deleted_ids().collect();
    let mut out = Vec::new();
    for (a, &i) in deleted.iter().enumerate() {
        for &j in &deleted[a + 1..] {
            let label = pair_label(g, i, j).expect("both ids are deleted lines of g");
            if label == 0.5 && !include_ties {
                continue;
            }
            out.push(PairSample {
                commit_id: g.commit_id.clone(),
                i,
                j,
                label,
            });
        }
    }
    out
}

/// Scores (`n×1`) of every node on the tape.
pub fn score_nodes(
    tape: &mut Tape,
    plan: &GraphPlan,
    h0: Var,
    p: &NetworkParams<Var>,
    cfg: &ModelConfig,
) -> Result<Var> {
    let a = network_forward(tape, plan, h0, p, cfg.mode)?;
    let aw = tape.matmul(a, p.scorer_w)?;
    Ok(tape.add(aw, p.scorer_b)?)
}

/// Summed pairwise loss of `pairs` given per-node scores, on the tape.
pub fn pairs_loss(tape: &mut Tape, scores: Var, pairs: &[PairSample], sigma: f64) -> Result<Var> {
    let n = tape.value(scores).rows();
    let mut diff = Matrix::zeros(pairs.len(), n);
    for (r, p) in pairs.iter().enumerate() {
        diff.set(r, p.i, 1.0);
        diff.set(r, p.j, -1.0);
    }
    let labels = Matrix::column_vector(pairs.iter().map(|p| p.label).collect());
    let complement = labels.map(|l| 1.0 - l);

    let diff = tape.constant(diff);
    let delta = tape.matmul(diff, scores)?;
    let scaled = tape.scale(delta, sigma)?;
    let prob = tape.sigmoid(scaled)?;
    let ones = tape.constant(Matrix::filled(pairs.len(), 1, 1.0));
    let one_minus = tape.sub(ones, prob)?;
    let log_p = tape.log(prob, LOG_FLOOR)?;
    let log_q = tape.log(one_minus, LOG_FLOOR)?;
    let labels = tape.constant(labels);
    let complement = tape.constant(complement);
    let a = tape.mul(log_p, labels)?;
    let b = tape.mul(log_q, complement)?;
    let total = tape.add(a, b)?;
    let s = tape.sum(total)?;
    Ok(tape.scale(s, -1.0)?)
}

/// Loss of one commit's pairs and its gradient w.r.t. every parameter.
pub fn loss_and_gradients(
    params: &NetworkParams<Matrix>,
    plan: &GraphPlan,
    h0: &Matrix,
    pairs: &[PairSample],
    cfg: &ModelConfig,
) -> Result<(f64, NetworkParams<Matrix>)> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let h = tape.constant(h0.clone());
    let scores = score_nodes(&mut tape, plan, h, &bound, cfg)?;
    let loss = pairs_loss(&mut tape, scores, pairs, cfg.sigma)?;
    let grads = tape.backward(loss)?;
    Ok((tape.value(loss).data()[0], bound.map(|v| grads.get(*v))))
}

/// Loss of one commit's pairs without building gradients.
pub fn evaluate_loss(
    params: &NetworkParams<Matrix>,
    plan: &GraphPlan,
    h0: &Matrix,
    pairs: &[PairSample],
    cfg: &ModelConfig,
) -> Result<f64> {
    let mut tape = Tape::new();
    let bound = params.bind_constant(&mut tape);
    let h = tape.constant(h0.clone());
    let scores = score_nodes(&mut tape, plan, h, &bound, cfg)?;
    let loss = pairs_loss(&mut tape, scores, pairs, cfg.sigma)?;
    Ok(tape.value(loss).data()[0])
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam with bias correction and no weight decay.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub step: u64,
    m: NetworkParams<Matrix>,
    v: NetworkParams<Matrix>,
}

impl Adam {
    pub fn new(params: &NetworkParams<Matrix>, lr: f64) -> Self {
        let zeros = params.map(|m| Matrix::zeros(m.rows(), m.cols()));
        Self {
            lr,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn update(&mut self, params: &mut NetworkParams<Matrix>, grads: &NetworkParams<Matrix>) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - ADAM_BETA1.powi(t);
        let c2 = 1.0 - ADAM_BETA2.powi(t);
        let grads: Vec<&Matrix> = grads.fields().into_iter().map(|(_, g)| g).collect();
        let ps = params.fields_mut();
        let ms = self.m.fields_mut();
        let vs = self.v.fields_mut();
        for (((p, m), v), g) in ps.into_iter().zip(ms).zip(vs).zip(grads) {
            let (p, m, v) = (p.data_mut(), m.data_mut(), v.data_mut());
            for k in 0..p.len() {
                let gk = g.data()[k];
                m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * gk;
                v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * gk * gk;
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                p[k] -= self.lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub params: NetworkParams<Matrix>,
    pub cfg: ModelConfig,
    /// Mean pair loss per epoch.
    pub training_log: Vec<f64>,
}

fn non_finite(epoch: usize, commit_id: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Tensor(TensorError::NonFinite { .. }) => Error::NonFiniteLoss {
            epoch,
            commit_id: commit_id.to_owned(),
        },
        other => other,
    }
}

pub fn train(ds: &[EmbeddedGraph], cfg: &ModelConfig) -> Result<TrainedModel> {
    train_with_progress(ds, cfg, |_, _| {})
}

/// Trains from a seeded initialization; `on_epoch(epoch, mean_loss)` fires after every epoch.
pub fn train_with_progress(
    ds: &[EmbeddedGraph],
    cfg: &ModelConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainedModel> {
    cfg.validate()?;
    for eg in ds {
        check_input_dim(cfg, eg.dim())?;
        if !eg.graph.is_labeled() {
            return Err(Error::Config(format!(
                "commit {} has no root-cause line and cannot be used for training",
                eg.graph.commit_id
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = NetworkParams::init(cfg, &mut rng);
    let mut adam = Adam::new(&params, cfg.lr);
    let plans: Vec<GraphPlan> = ds.iter().map(|eg| GraphPlan::new(&eg.graph)).collect();
    let pairs: Vec<Vec<PairSample>> = ds
        .iter()
        .map(|eg| build_pairs(&eg.graph, cfg.include_tie_pairs))
        .collect();
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut count = 0usize;
        for &idx in &order {
            let eg = &ds[idx];
            let commit_pairs = &pairs[idx];
            if commit_pairs.is_empty() {
                continue;
            }
            let wrap = non_finite(epoch, &eg.graph.commit_id);
            let batches: Vec<&[PairSample]> = match cfg.step {
                StepGranularity::Commit => vec![commit_pairs.as_slice()],
                StepGranularity::Pair => commit_pairs.chunks(1).collect(),
            };
            for batch in batches {
                let (loss, grads) = loss_and_gradients(&params, &plans[idx], &eg.h0, batch, cfg).map_err(&wrap)?;
                if !loss.is_finite() {
                    return Err(wrap(Error::Tensor(TensorError::NonFinite { op: "loss" })));
                }
                adam.update(&mut params, &grads);
                total += loss;
                count += batch.len();
            }
        }
        let mean = if count == 0 { 0.0 } else { total / count as f64 };
        log.push(mean);
        on_epoch(epoch, mean);
    }

    Ok(TrainedModel {
        params,
        cfg: cfg.clone(),
        training_log: log,
    })
}

/// Scores of every node of `eg` under `params`.
pub fn node_scores(params: &NetworkParams<Matrix>, cfg: &ModelConfig, eg: &EmbeddedGraph) -> Result<Vec<f64>> {
    check_input_dim(cfg, eg.dim())?;
    let plan = GraphPlan::new(&eg.graph);
    let mut tape = Tape::new();
    let bound = params.bind_constant(&mut tape);
    let h = tape.constant(eg.h0.clone());
    let s = score_nodes(&mut tape, &plan, h, &bound, cfg)?;
    Ok(tape.value(s).data().to_vec())
}

/// Orders `(id, score)` by descending score, ties by ascending id.
pub fn order_by_score(mut scored: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored
}

/// Deleted lines of `eg`, most likely root cause first.
pub fn rank_commit(m: &TrainedModel, eg: &EmbeddedGraph) -> Result<Vec<(usize, f64)>> {
    let deleted: Vec<usize> = eg.graph.deleted_ids().collect();
    if deleted.is_empty() {
        return Err(Error::Evaluation(format!(
            "commit {} has no deleted lines",
            eg.graph.commit_id
        )));
    }
    let scores = node_scores(&m.params, &m.cfg, eg)?;
    Ok(order_by_score(deleted.into_iter().map(|id| (id, scores[id])).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::LineNode;

    fn commit(roots: &[bool]) -> CommitGraph {
        CommitGraph {
            commit_id: "c".into(),
            timestamp: None,
            nodes: roots
                .iter()
                .enumerate()
                .map(|(i, &r)| {
                    let n = LineNode::new(i, NodeKind::Deleted, "x");
                    if r {
                        n.root_cause()
                    } else {
                        n
                    }
                })
                .chain(std::iter::once(LineNode::new(roots.len(), NodeKind::Added, "y")))
                .collect(),
            edges: vec![],
        }
    }

    #[test]
    fn score_examples() {
        assert_eq!(score(&[1.0, 2.0], &[0.0, 0.0], 3.0), 3.0);
        assert_eq!(score(&[7.0, 9.0], &[1.0, 0.0], 0.0), 7.0);
        assert_eq!(
            score(&[1.0, 5.0], &[2.0, 0.0], 0.0),
            score(&[1.0, -3.0], &[2.0, 0.0], 0.0)
        );
    }

    #[test]
    fn probability_examples() {
        assert_eq!(pair_probability(1.3, 1.3, 1.0), 0.5);
        assert!(pair_probability(40.0, -40.0, 1.0) > 1.0 - 1e-15);
        assert!((pair_probability(3f64.ln(), 0.0, 1.0) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn label_cases() {
        let g = commit(&[true, false, true]);
        assert_eq!(pair_label(&g, 0, 1).unwrap(), 1.0);
        assert_eq!(pair_label(&g, 1, 0).unwrap(), 0.0);
        assert_eq!(pair_label(&g, 0, 2).unwrap(), 0.5);
        assert!(pair_label(&g, 0, 3).is_err());
    }

    #[test]
    fn loss_examples() {
        assert!((pairwise_loss(0.5, 1.0) - 2f64.ln()).abs() < 1e-15);
        let tie = -0.5 * 0.5f64.ln() * 2.0;
        assert!((pairwise_loss(0.5, 0.5) - tie).abs() < 1e-15);
        assert!(pairwise_loss(1.0 - 1e-10, 1.0) < 1e-9);
        assert!(pairwise_loss(0.0, 1.0).is_finite());
    }

    #[test]
    fn pairs_enumeration() {
        let g = commit(&[true, false, false]);
        let pairs: Vec<(usize, usize, f64)> = build_pairs(&g, false).iter().map(|p| (p.i, p.j, p.label)).collect();
        assert_eq!(pairs, vec![(0, 1, 1.0), (0, 2, 1.0)]);
        let with_ties: Vec<(usize, usize, f64)> = build_pairs(&g, true).iter().map(|p| (p.i, p.j, p.label)).collect();
        assert_eq!(with_ties, vec![(0, 1, 1.0), (0, 2, 1.0), (1, 2, 0.5)]);
        assert!(build_pairs(&commit(&[true]), true).is_empty());
    }

    #[test]
    fn ordering_rule() {
        assert_eq!(order_by_score(vec![(0, 2.0), (3, 5.0)]), vec![(3, 5.0), (0, 2.0)]);
        assert_eq!(
            order_by_score(vec![(4, 1.0), (1, 1.0), (2, 1.0)]),
            vec![(1, 1.0), (2, 1.0), (4, 1.0)]
        );
    }

    #[test]
    fn tape_loss_matches_scalar_loss() {
        let mut tape = Tape::new();
        let scores = tape.constant(Matrix::column_vector(vec![0.3, -1.2, 2.0]));
        let pairs = vec![
            PairSample {
                commit_id: "c".into(),
                i: 0,
                j: 1,
                label: 1.0,
            },
            PairSample {
                commit_id: "c".into(),
                i: 0,
                j: 2,
                label: 0.0,
            },
            PairSample {
                commit_id: "c".into(),
                i: 1,
                j: 2,
                label: 0.5,
            },
        ];
        let l = pairs_loss(&mut tape, scores, &pairs, 1.5).unwrap();
        let s = [0.3, -1.2, 2.0];
        let expected: f64 = pairs
            .iter()
            .map(|p| pairwise_loss(pair_probability(s[p.i], s[p.j], 1.5), p.label))
            .sum();
        assert!((tape.value(l).data()[0] - expected).abs() < 1e-12);
    }
}
