//! Finite-difference check of the full network's gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rcd_tensor::{grad_check, Matrix, TensorError};

use crate::config::ModelConfig;
use crate::embedding::{embed_graph, EmbeddedGraph, HashingEmbedder};
use crate::error::Result;
use crate::graph::{CommitGraph, DepEdge, EdgeKind, LineNode, NodeKind};
use crate::params::NetworkParams;
use crate::plan::GraphPlan;
use crate::ranker::{build_pairs, pairs_loss, score_nodes};

/// Four lines, every node kind and four edge kinds, one root cause.
pub fn fixture_graph() -> CommitGraph {
    CommitGraph {
        commit_id: "gradcheck".into(),
        timestamp: None,
        nodes: vec![
            LineNode::new(0, NodeKind::Deleted, "if (user == null) return cache.get(key);").root_cause(),
            LineNode::new(1, NodeKind::Deleted, "int total = count + offset;"),
            LineNode::new(2, NodeKind::Deleted, "log.debug(total);"),
            LineNode::new(3, NodeKind::Added, "if (user == null || key == null) return null;"),
        ],
        edges: vec![
            DepEdge::new(1, 2, EdgeKind::DataDependency),
            DepEdge::new(0, 1, EdgeKind::ControlFlow),
            DepEdge::new(3, 1, EdgeKind::Call),
            DepEdge::new(0, 3, EdgeKind::LineMapping),
            DepEdge::new(2, 0, EdgeKind::ClassMemberRef),
            DepEdge::new(3, 0, EdgeKind::DataDependency),
        ],
    }
}

/// Worst relative error per named tensor, in checkpoint order.
#[derive(Clone, Debug)]
pub struct GradientReport {
    pub per_tensor: Vec<(String, f64)>,
    pub max_rel_err: f64,
}

/// Compares analytic gradients of the pairwise loss on `eg` with central
/// differences of step `h`, for every parameter tensor.
pub fn check_gradients(
    params: &NetworkParams<Matrix>,
    cfg: &ModelConfig,
    eg: &EmbeddedGraph,
    h: f64,
) -> Result<GradientReport> {
    cfg.validate()?;
    crate::network::check_input_dim(cfg, eg.dim())?;
    let plan = GraphPlan::new(&eg.graph);
    let pairs = build_pairs(&eg.graph, cfg.include_tie_pairs);
    let fields = params.fields();
    let values: Vec<Matrix> = fields.iter().map(|(_, m)| (*m).clone()).collect();

    let report = grad_check(
        |tape, vars| {
            let bound = params.with_values(vars.to_vec());
            let h0 = tape.constant(eg.h0.clone());
            let loss = score_nodes(tape, &plan, h0, &bound, cfg)
                .and_then(|s| pairs_loss(tape, s, &pairs, cfg.sigma))
                .map_err(|e| match e {
                    crate::error::Error::Tensor(t) => t,
                    other => TensorError::InvalidArgument {
                        op: "network",
                        reason: other.to_string(),
                    },
                })?;
            Ok(loss)
        },
        &values,
        h,
    )?;
    Ok(GradientReport {
        per_tensor: fields.into_iter().map(|(n, _)| n).zip(report.per_param).collect(),
        max_rel_err: report.max_rel_err,
    })
}

/// Runs [`check_gradients`] on [`fixture_graph`] with seeded parameters,
/// jittered so no bias or prior sits at its initial constant.
pub fn fixture_check(cfg: &ModelConfig, h: f64) -> Result<GradientReport> {
    let eg = embed_graph(&fixture_graph(), &HashingEmbedder::new(cfg.dim)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = NetworkParams::init(cfg, &mut rng);
    for m in params.fields_mut() {
        for v in m.data_mut() {
            *v += rng.gen_range(-0.1..0.1);
        }
    }
    check_gradients(&params, cfg, &eg, h)
}
