mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rcd_core::evaluation::{
    classification_at_k, first_ranks, kfold_split, mfr, mfr_with, recall_at_n, report_from_rankings, EvalReport,
};
use rcd_core::{embed_dataset, generate, CommitRanking, EvalOptions, GenConfig, HashingEmbedder, MfrMode};

fn cr(id: &str, ranked: &[usize], truth: &[usize]) -> CommitRanking {
    CommitRanking {
        commit_id: id.into(),
        ranked: ranked.to_vec(),
        truth: truth.iter().copied().collect(),
    }
}

/// First ranks 1, 1, 3, 3, 7; truth positions {1}, {1,3}, {3,5}, {3}, {7}.
fn fixture() -> Vec<CommitRanking> {
    vec![
        cr("c1", &[0, 1, 2], &[0]),
        cr("c2", &[0, 2, 1], &[0, 1]),
        cr("c3", &[3, 1, 4, 2, 0], &[4, 0]),
        cr("c4", &[2, 0, 1], &[1]),
        cr("c5", &[5, 4, 3, 2, 1, 0, 6, 7, 8, 9], &[6]),
    ]
}

#[test]
fn fixture_recall() {
    let rs = fixture();
    assert_eq!(recall_at_n(&rs, 1).unwrap(), 2.0 / 7.0);
    assert_eq!(recall_at_n(&rs, 2).unwrap(), 2.0 / 7.0);
    assert_eq!(recall_at_n(&rs, 3).unwrap(), 5.0 / 7.0);
    assert_eq!(recall_at_n(&rs, 10).unwrap(), 1.0);
}

#[test]
fn fixture_mfr() {
    let rs = fixture();
    assert_eq!(first_ranks(&rs).unwrap(), vec![1, 1, 3, 3, 7]);
    assert_eq!(mfr(&rs).unwrap(), 3.0);
    assert_eq!(mfr_with(&rs, MfrMode::AllDefects).unwrap(), 23.0 / 7.0);
}

#[test]
fn fixture_classification() {
    let rs = fixture();
    let c = classification_at_k(&rs, 1).unwrap();
    assert_eq!((c.precision, c.recall), (2.0 / 5.0, 2.0 / 7.0));
    assert_eq!(c.f1, 1.0 / 3.0);
    let c = classification_at_k(&rs, 2).unwrap();
    assert_eq!((c.precision, c.recall), (2.0 / 10.0, 2.0 / 7.0));
    assert_eq!(c.f1, 4.0 / 17.0);
    let c = classification_at_k(&rs, 3).unwrap();
    assert_eq!((c.precision, c.recall), (5.0 / 15.0, 5.0 / 7.0));
    assert_eq!(c.f1, 5.0 / 11.0);
}

#[test]
fn fixture_report() {
    let opts = EvalOptions {
        classification: true,
        ..EvalOptions::default()
    };
    let r = report_from_rankings(&fixture(), &opts).unwrap();
    assert_eq!(r.recall_at(3), 5.0 / 7.0);
    assert_eq!(r.classification.as_ref().unwrap().len(), 3);
    let back: EvalReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(back, r);
}

#[test]
fn metric_examples() {
    assert_eq!(recall_at_n(&[cr("a", &[0, 1, 2], &[0])], 1).unwrap(), 1.0);
    assert_eq!(recall_at_n(&[cr("a", &[0, 2, 1], &[0, 1])], 2).unwrap(), 0.5);
    assert_eq!(
        recall_at_n(&[cr("a", &(0..10).collect::<Vec<_>>(), &[6])], 3).unwrap(),
        0.0
    );
    assert_eq!(mfr(&[cr("a", &[0, 1], &[0]), cr("b", &[1, 0], &[1])]).unwrap(), 1.0);
    assert_eq!(
        mfr(&[cr("a", &[0, 1, 2], &[0]), cr("b", &[0, 1, 2], &[2])]).unwrap(),
        2.0
    );
    assert_eq!(first_ranks(&[cr("a", &[0, 1, 2, 3, 4], &[1, 4])]).unwrap(), vec![2]);
    let c = classification_at_k(&[cr("a", &[1, 0], &[0])], 1).unwrap();
    assert_eq!((c.precision, c.recall, c.f1), (0.0, 0.0, 0.0));
}

#[test]
fn empty_input_is_error() {
    assert!(recall_at_n(&[], 1).is_err());
    assert!(mfr(&[]).is_err());
    assert!(classification_at_k(&[], 1).is_err());
    assert!(mfr(&[cr("a", &[0, 1], &[])]).is_err());
}

fn ranking() -> impl Strategy<Value = CommitRanking> {
    (2usize..12)
        .prop_flat_map(|n| {
            (
                Just(n),
                Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
                proptest::collection::btree_set(0..n, 1..=n),
            )
        })
        .prop_map(
            |(_, ranked, truth): (usize, Vec<usize>, BTreeSet<usize>)| CommitRanking {
                commit_id: "p".into(),
                ranked,
                truth,
            },
        )
}

proptest! {
    #[test]
    fn metric_ranges_and_monotonicity(rs in proptest::collection::vec(ranking(), 1..6)) {
        let r1 = recall_at_n(&rs, 1).unwrap();
        let r2 = recall_at_n(&rs, 2).unwrap();
        let r3 = recall_at_n(&rs, 3).unwrap();
        prop_assert!((0.0..=1.0).contains(&r1));
        prop_assert!(r1 <= r2 && r2 <= r3 && r3 <= 1.0);
        let m = mfr(&rs).unwrap();
        prop_assert!(m >= 1.0);
        for r in &rs {
            let one = std::slice::from_ref(r);
            prop_assert!(mfr_with(one, MfrMode::AllDefects).unwrap() >= mfr(one).unwrap());
        }
    }
}

fn graphs(n: usize) -> Vec<rcd_core::EmbeddedGraph> {
    let ds = generate(&GenConfig {
        n_commits: n,
        deleted_per_commit: 2,
        added_per_commit: 1,
        ..GenConfig::default()
    })
    .unwrap();
    embed_dataset(&ds, &HashingEmbedder::new(8).unwrap()).unwrap()
}

#[test]
fn kfold_examples() {
    let ten = kfold_split(&graphs(10), 10, 3, false).unwrap();
    assert!(ten.iter().all(|f| f.len() == 1));

    let gs = graphs(23);
    let folds = kfold_split(&gs, 10, 3, false).unwrap();
    let mut sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    assert_eq!(sizes, vec![3, 3, 3, 2, 2, 2, 2, 2, 2, 2]);
    let all: BTreeSet<&String> = folds.iter().flatten().collect();
    assert_eq!(all.len(), 23);

    assert_eq!(folds, kfold_split(&gs, 10, 3, false).unwrap());
    assert_ne!(folds, kfold_split(&gs, 10, 4, false).unwrap());
    assert!(kfold_split(&graphs(5), 10, 3, false).is_err());
}

#[test]
fn chronological_folds_are_contiguous() {
    let gs = graphs(23);
    let folds = kfold_split(&gs, 10, 3, true).unwrap();
    let flat: Vec<&String> = folds.iter().flatten().collect();
    let ids: Vec<&String> = gs.iter().map(|g| &g.graph.commit_id).collect();
    assert_eq!(flat, ids);
    assert_eq!(folds[0].len(), 3);

    let mut untimed = gs.clone();
    untimed[4].graph.timestamp = None;
    assert_eq!(
        kfold_split(&untimed, 10, 3, true).unwrap(),
        kfold_split(&untimed, 10, 3, false).unwrap()
    );
}
