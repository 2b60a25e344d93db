mod common;

use common::rng;
use rand::Rng;
use rcd_core::graph::{CommitGraph, LineNode, NodeKind};
use rcd_core::ranker::{build_pairs, pair_label, pair_probability, pairwise_loss};

#[test]
fn probabilities_are_complementary() {
    let mut r = rng(31);
    for _ in 0..1000 {
        let (a, b) = (r.gen_range(-20.0..20.0), r.gen_range(-20.0..20.0));
        let sigma = r.gen_range(0.1..3.0);
        let sum = pair_probability(a, b, sigma) + pair_probability(b, a, sigma);
        assert!((sum - 1.0).abs() <= 1e-12, "{a} {b} {sigma}: {sum}");
    }
}

#[test]
fn equal_scores_give_half() {
    for s in [-3.0, 0.0, 1e-3, 42.0] {
        assert!((pair_probability(s, s, 1.0) - 0.5).abs() <= 1e-12);
    }
}

#[test]
fn loss_examples() {
    assert!((pairwise_loss(0.5, 1.0) - std::f64::consts::LN_2).abs() <= 1e-12);
    assert!(pairwise_loss(1.0, 1.0).abs() <= 1e-12);
    assert!(pairwise_loss(0.0, 1.0).is_finite());
}

fn commit() -> CommitGraph {
    CommitGraph {
        commit_id: "c".into(),
        timestamp: None,
        nodes: vec![
            LineNode::new(0, NodeKind::Deleted, "a"),
            LineNode::new(1, NodeKind::Deleted, "b").root_cause(),
            LineNode::new(2, NodeKind::Added, "c"),
            LineNode::new(3, NodeKind::Deleted, "d"),
        ],
        edges: vec![],
    }
}

#[test]
fn labels_follow_root_cause_order() {
    let g = commit();
    assert_eq!(pair_label(&g, 1, 0).unwrap(), 1.0);
    assert_eq!(pair_label(&g, 0, 1).unwrap(), 0.0);
    assert_eq!(pair_label(&g, 0, 3).unwrap(), 0.5);
    assert!(pair_label(&g, 0, 2).is_err());
}

#[test]
fn pairs_exclude_ties_by_default() {
    let g = commit();
    let strict = build_pairs(&g, false);
    assert_eq!(
        strict.iter().map(|p| (p.i, p.j)).collect::<Vec<_>>(),
        vec![(0, 1), (1, 3)]
    );
    let all = build_pairs(&g, true);
    assert_eq!(all.len(), 3);
    assert!(all.iter().any(|p| p.label == 0.5));
}
