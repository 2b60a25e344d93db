//! Typed multi-head attention over the commit graph.
//!
//! Each node is projected to key/query/value vectors with the projection of
//! its own kind, split into heads, and every incoming edge `(s, e, t)` gets a
//! per-head logit `K(s) · W_att[e] · Q(t)ᵀ · μ[τ(s), e, τ(t)] / √(D/H)`.
//! Logits of all edges entering a target share one softmax per head, and the
//! target's aggregate is the weighted sum of the edge messages `V(s) · W_msg[e]`,
//! heads concatenated. Nodes without incoming edges aggregate to zero.

use rcd_tensor::{Matrix, Tape, Var};

use crate::error::Result;
use crate::params::HgtLayerParams;
use crate::plan::GraphPlan;

/// Per-head key, query and value matrices (`n × D/H` each).
#[derive(Clone, Debug)]
pub struct HeadVectors {
    pub k: Vec<Var>,
    pub q: Vec<Var>,
    pub v: Vec<Var>,
}

/// `x · wᵀ + b` with `b` broadcast over rows.
pub fn affine(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
    let wt = tape.transpose(w)?;
    let xw = tape.matmul(x, wt)?;
    Ok(tape.add(xw, b)?)
}

/// Applies the projection of each node's own kind.
fn typed_projection(tape: &mut Tape, plan: &GraphPlan, h: Var, w: &[Var; 2], b: &[Var; 2]) -> Result<Var> {
    let mut acc: Option<Var> = None;
    for (k, mask) in plan.kind_mask.iter().enumerate() {
        let Some(mask) = mask else { continue };
        let proj = affine(tape, h, w[k], b[k])?;
        let m = tape.constant(mask.clone());
        let part = tape.mul(proj, m)?;
        acc = Some(match acc {
            None => part,
            Some(a) => tape.add(a, part)?,
        });
    }
    Ok(acc.expect("graph has at least one node"))
}

pub fn project_kqv(tape: &mut Tape, plan: &GraphPlan, h: Var, p: &HgtLayerParams<Var>) -> Result<HeadVectors> {
    let heads = p.heads;
    let k = typed_projection(tape, plan, h, &p.k_w, &p.k_b)?;
    let q = typed_projection(tape, plan, h, &p.q_w, &p.q_b)?;
    let v = typed_projection(tape, plan, h, &p.v_w, &p.v_b)?;
    Ok(HeadVectors {
        k: tape.split_even(k, heads)?,
        q: tape.split_even(q, heads)?,
        v: tape.split_even(v, heads)?,
    })
}

/// `Σ_e  S_src[e] · (x · W[e])`: each edge row holds its source's head vector
/// transformed by the matrix of the edge's kind.
fn per_edge_transform(
    tape: &mut Tape,
    plan: &GraphPlan,
    x: Var,
    matrix_for: impl Fn(crate::graph::EdgeKind) -> Var,
) -> Result<Var> {
    let mut acc: Option<Var> = None;
    for group in &plan.groups {
        let xw = tape.matmul(x, matrix_for(group.kind))?;
        let sel = tape.constant(group.src_select.clone());
        let rows = tape.matmul(sel, xw)?;
        acc = Some(match acc {
            None => rows,
            Some(a) => tape.add(a, rows)?,
        });
    }
    Ok(acc.expect("caller checks for edges"))
}

/// Per-head `E×1` logits in [`GraphPlan::edges`] order. Empty when the graph has no edges.
pub fn attention_logits(
    tape: &mut Tape,
    plan: &GraphPlan,
    kv: &HeadVectors,
    p: &HgtLayerParams<Var>,
) -> Result<Vec<Var>> {
    if plan.edge_count() == 0 {
        return Ok(Vec::new());
    }
    let head_dim = tape.value(kv.k[0]).cols();
    let inv_sqrt_d = 1.0 / (head_dim as f64).sqrt();
    let prior_sel = tape.constant(plan.prior_select.clone());
    let prior = tape.matmul(prior_sel, p.mu)?;
    let dst_sel = tape.constant(plan.dst_select.clone());

    let mut out = Vec::with_capacity(p.heads);
    for i in 0..p.heads {
        let keyed = per_edge_transform(tape, plan, kv.k[i], |e| *p.att(e, i))?;
        let q_dst = tape.matmul(dst_sel, kv.q[i])?;
        let prod = tape.mul(keyed, q_dst)?;
        let dot = tape.sum_rows(prod)?;
        let weighted = tape.mul(dot, prior)?;
        out.push(tape.scale(weighted, inv_sqrt_d)?);
    }
    Ok(out)
}

/// Softmax of each head's logits over every incoming edge of each target.
pub fn attention_weights(tape: &mut Tape, plan: &GraphPlan, logits: &[Var]) -> Result<Vec<Var>> {
    logits
        .iter()
        .map(|&l| Ok(tape.softmax_segments(l, &plan.segments)?))
        .collect()
}

/// Per-head `E × D/H` messages.
pub fn propagate_messages(
    tape: &mut Tape,
    plan: &GraphPlan,
    kv: &HeadVectors,
    p: &HgtLayerParams<Var>,
) -> Result<Vec<Var>> {
    if plan.edge_count() == 0 {
        return Ok(Vec::new());
    }
    (0..p.heads)
        .map(|i| per_edge_transform(tape, plan, kv.v[i], |e| *p.msg(e, i)))
        .collect()
}

/// Weighted sum of messages into their targets, heads concatenated (`n×D`).
pub fn aggregate(tape: &mut Tape, plan: &GraphPlan, weights: &[Var], messages: &[Var], dim: usize) -> Result<Var> {
    if plan.edge_count() == 0 {
        return Ok(tape.constant(Matrix::zeros(plan.n, dim)));
    }
    let scatter = tape.constant(plan.scatter.clone());
    let mut heads = Vec::with_capacity(weights.len());
    for (&w, &m) in weights.iter().zip(messages) {
        let weighted = tape.mul(m, w)?;
        heads.push(tape.matmul(scatter, weighted)?);
    }
    Ok(tape.concat(&heads)?)
}

/// Intermediate values of one aggregation pass, kept for inspection.
#[derive(Clone, Debug)]
pub struct HgtTrace {
    pub h_tilde: Var,
    pub logits: Vec<Var>,
    pub weights: Vec<Var>,
}

pub fn hgt_forward_traced(tape: &mut Tape, plan: &GraphPlan, h_prev: Var, p: &HgtLayerParams<Var>) -> Result<HgtTrace> {
    let dim = tape.value(h_prev).cols();
    let kv = project_kqv(tape, plan, h_prev, p)?;
    let logits = attention_logits(tape, plan, &kv, p)?;
    let weights = attention_weights(tape, plan, &logits)?;
    let messages = propagate_messages(tape, plan, &kv, p)?;
    let h_tilde = aggregate(tape, plan, &weights, &messages, dim)?;
    Ok(HgtTrace {
        h_tilde,
        logits,
        weights,
    })
}

pub fn hgt_forward(tape: &mut Tape, plan: &GraphPlan, h_prev: Var, p: &HgtLayerParams<Var>) -> Result<Var> {
    Ok(hgt_forward_traced(tape, plan, h_prev, p)?.h_tilde)
}
