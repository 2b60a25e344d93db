//! Constant index matrices derived from a graph's structure.
//!
//! Edge gathers and scatters are expressed as products with 0/1 selection
//! matrices so the whole forward pass stays within the tape's op set.

use rcd_tensor::Matrix;

use crate::graph::{CommitGraph, EdgeKind, NodeKind};
use crate::params::{prior_index, PRIOR_LEN};

#[derive(Clone, Debug)]
pub struct EdgeGroup {
    pub kind: EdgeKind,
    /// `E×n`: row `j` selects the source of edge `j` when edge `j` has this kind, else zero.
    pub src_select: Matrix,
}

#[derive(Clone, Debug)]
pub struct GraphPlan {
    pub n: usize,
    pub kinds: Vec<NodeKind>,
    /// Edges sorted by `(dst, src, kind)`: the concatenation of every target's
    /// incoming neighbour list.
    pub edges: Vec<(usize, usize, EdgeKind)>,
    /// `(start, len)` runs of `edges` sharing a target.
    pub segments: Vec<(usize, usize)>,
    pub groups: Vec<EdgeGroup>,
    /// `E×n`, selects each edge's target.
    pub dst_select: Matrix,
    /// `n×E`, sums edge rows into their targets.
    pub scatter: Matrix,
    /// `E×PRIOR_LEN`, selects each edge's prior.
    pub prior_select: Matrix,
    /// `n×1` indicator columns per node kind (absent kinds are `None`).
    pub kind_mask: [Option<Matrix>; 2],
    /// Ids of deleted nodes, ascending.
    pub deleted: Vec<usize>,
}

impl GraphPlan {
    pub fn new(g: &CommitGraph) -> Self {
        let n = g.nodes.len();
        let kinds: Vec<NodeKind> = g.nodes.iter().map(|v| v.kind).collect();
        let mut edges: Vec<(usize, usize, EdgeKind)> = g.edges.iter().map(|e| (e.dst, e.src, e.kind)).collect();
        edges.sort();
        let edges: Vec<(usize, usize, EdgeKind)> = edges.into_iter().map(|(t, s, k)| (s, t, k)).collect();
        let e_count = edges.len();

        let mut segments: Vec<(usize, usize)> = Vec::new();
        for (j, &(_, t, _)) in edges.iter().enumerate() {
            match segments.last_mut() {
                Some((start, len)) if edges[*start].1 == t => *len += 1,
                _ => segments.push((j, 1)),
            }
        }

        let mut groups = Vec::new();
        for kind in EdgeKind::ALL {
            if !edges.iter().any(|e| e.2 == kind) {
                continue;
            }
            let mut src_select = Matrix::zeros(e_count, n);
            for (j, &(s, _, k)) in edges.iter().enumerate() {
                if k == kind {
                    src_select.set(j, s, 1.0);
                }
            }
            groups.push(EdgeGroup { kind, src_select });
        }

        let mut dst_select = Matrix::zeros(e_count, n);
        let mut prior_select = Matrix::zeros(e_count, PRIOR_LEN);
        for (j, &(s, t, k)) in edges.iter().enumerate() {
            dst_select.set(j, t, 1.0);
            prior_select.set(j, prior_index(kinds[s], k, kinds[t]), 1.0);
        }
        let scatter = dst_select.transpose();

        let mask = |kind: NodeKind| {
            kinds
                .contains(&kind)
                .then(|| Matrix::column_vector(kinds.iter().map(|&k| if k == kind { 1.0 } else { 0.0 }).collect()))
        };
        let kind_mask = [mask(NodeKind::Deleted), mask(NodeKind::Added)];
        let deleted = (0..n).filter(|&i| kinds[i] == NodeKind::Deleted).collect();

        Self {
            n,
            kinds,
            edges,
            segments,
            groups,
            dst_select,
            scatter,
            prior_select,
            kind_mask,
            deleted,
        }
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Targets with no incoming edges.
    pub fn isolated_targets(&self) -> Vec<usize> {
        let mut has_in = vec![false; self.n];
        for &(_, t, _) in &self.edges {
            has_in[t] = true;
        }
        (0..self.n).filter(|&i| !has_in[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{neighbors_in, DepEdge, LineNode};

    #[test]
    fn edge_order_matches_neighbors_in() {
        let g = CommitGraph {
            commit_id: "p".into(),
            timestamp: None,
            nodes: vec![
                LineNode::new(0, NodeKind::Deleted, "a"),
                LineNode::new(1, NodeKind::Deleted, "b"),
                LineNode::new(2, NodeKind::Added, "c"),
                LineNode::new(3, NodeKind::Added, "d"),
            ],
            edges: vec![
                DepEdge::new(3, 1, EdgeKind::Call),
                DepEdge::new(0, 2, EdgeKind::LineMapping),
                DepEdge::new(0, 1, EdgeKind::Call),
                DepEdge::new(0, 1, EdgeKind::ControlFlow),
            ],
        };
        let plan = GraphPlan::new(&g);
        let mut expected = Vec::new();
        for t in 0..4 {
            for (s, k) in neighbors_in(&g, t).unwrap() {
                expected.push((s, t, k));
            }
        }
        assert_eq!(plan.edges, expected);
        assert_eq!(plan.segments, vec![(0, 3), (3, 1)]);
        assert_eq!(plan.isolated_targets(), vec![0, 3]);
        assert_eq!(plan.groups.len(), 3);
        assert_eq!(plan.deleted, vec![0, 1]);
    }
}
