//! Ranking metrics and the cross-validation / cross-project harness.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Mode, ModelConfig};
use crate::embedding::EmbeddedGraph;
use crate::error::{Error, Result};
use crate::ranker::{rank_commit, train, TrainedModel};

#[derive(Clone, Debug, PartialEq)]
pub struct CommitRanking {
    pub commit_id: String,
    /// Deleted line ids, best first.
    pub ranked: Vec<usize>,
    pub truth: BTreeSet<usize>,
}

impl CommitRanking {
    /// 1-based positions of the truth lines, ascending.
    fn truth_positions(&self) -> Vec<usize> {
        self.ranked
            .iter()
            .enumerate()
            .filter(|(_, id)| self.truth.contains(id))
            .map(|(p, _)| p + 1)
            .collect()
    }

    fn hits(&self, n: usize) -> usize {
        self.ranked.iter().take(n).filter(|id| self.truth.contains(id)).count()
    }
}

fn non_empty(rs: &[CommitRanking]) -> Result<()> {
    if rs.is_empty() {
        return Err(Error::Evaluation("no rankings to evaluate".into()));
    }
    Ok(())
}

/// Truth lines found in the top `n`, over all truth lines.
pub fn recall_at_n(rs: &[CommitRanking], n: usize) -> Result<f64> {
    non_empty(rs)?;
    if n == 0 {
        return Err(Error::Evaluation("n must be at least 1".into()));
    }
    let hits: usize = rs.iter().map(|r| r.hits(n)).sum();
    let total: usize = rs.iter().map(|r| r.truth.len()).sum();
    if total == 0 {
        return Err(Error::Evaluation("rankings contain no truth lines".into()));
    }
    Ok(hits as f64 / total as f64)
}

/// How rank positions are averaged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MfrMode {
    /// Mean over commits of the best-placed truth line's rank.
    #[default]
    FirstRank,
    /// Mean over every truth line's rank.
    AllDefects,
}

/// Per-commit rank of the best-placed truth line.
pub fn first_ranks(rs: &[CommitRanking]) -> Result<Vec<usize>> {
    rs.iter()
        .map(|r| {
            r.truth_positions().first().copied().ok_or_else(|| {
                Error::Evaluation(format!(
                    "commit {} has no truth line among its ranked lines",
                    r.commit_id
                ))
            })
        })
        .collect()
}

pub fn mfr(rs: &[CommitRanking]) -> Result<f64> {
    mfr_with(rs, MfrMode::FirstRank)
}

pub fn mfr_with(rs: &[CommitRanking], mode: MfrMode) -> Result<f64> {
    non_empty(rs)?;
    let firsts = first_ranks(rs)?;
    match mode {
        MfrMode::FirstRank => Ok(firsts.iter().sum::<usize>() as f64 / firsts.len() as f64),
        MfrMode::AllDefects => {
            let all: Vec<usize> = rs.iter().flat_map(|r| r.truth_positions()).collect();
            Ok(all.iter().sum::<usize>() as f64 / all.len() as f64)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Treats each commit's top `k` lines as positive predictions.
pub fn classification_at_k(rs: &[CommitRanking], k: usize) -> Result<Classification> {
    non_empty(rs)?;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for r in rs {
        let top: BTreeSet<usize> = r.ranked.iter().take(k).copied().collect();
        let hit = top.intersection(&r.truth).count();
        tp += hit;
        fp += top.len() - hit;
        fn_ += r.truth.len() - hit;
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    // Harmonic mean of precision and recall, from counts.
    let f1 = ratio(2 * tp, 2 * tp + fp + fn_);
    Ok(Classification {
        k,
        precision,
        recall,
        f1,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(rename = "recall@1")]
    pub recall_at_1: f64,
    #[serde(rename = "recall@2")]
    pub recall_at_2: f64,
    #[serde(rename = "recall@3")]
    pub recall_at_3: f64,
    pub mfr: f64,
    pub per_commit_first_rank: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<Vec<Classification>>,
}

impl EvalReport {
    pub fn recall_at(&self, n: usize) -> f64 {
        match n {
            1 => self.recall_at_1,
            2 => self.recall_at_2,
            3 => self.recall_at_3,
            _ => panic!("reports carry recall@1..3 only"),
        }
    }

    /// Arithmetic mean of fold reports; per-commit ranks are concatenated.
    pub fn mean(reports: &[EvalReport]) -> EvalReport {
        let k = reports.len() as f64;
        let avg = |f: &dyn Fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / k;
        let classification = reports.first().and_then(|r| r.classification.as_ref()).map(|first| {
            (0..first.len())
                .map(|i| Classification {
                    k: first[i].k,
                    precision: avg(&|r| r.classification.as_ref().map_or(0.0, |c| c[i].precision)),
                    recall: avg(&|r| r.classification.as_ref().map_or(0.0, |c| c[i].recall)),
                    f1: avg(&|r| r.classification.as_ref().map_or(0.0, |c| c[i].f1)),
                })
                .collect()
        });
        EvalReport {
            recall_at_1: avg(&|r| r.recall_at_1),
            recall_at_2: avg(&|r| r.recall_at_2),
            recall_at_3: avg(&|r| r.recall_at_3),
            mfr: avg(&|r| r.mfr),
            per_commit_first_rank: reports.iter().flat_map(|r| r.per_commit_first_rank.clone()).collect(),
            classification,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct EvalOptions {
    pub mfr_mode: MfrMode,
    pub classification: bool,
    /// Worker threads for ranking and folds; 0 or 1 runs inline.
    pub jobs: usize,
}

pub fn report_from_rankings(rs: &[CommitRanking], opts: &EvalOptions) -> Result<EvalReport> {
    Ok(EvalReport {
        recall_at_1: recall_at_n(rs, 1)?,
        recall_at_2: recall_at_n(rs, 2)?,
        recall_at_3: recall_at_n(rs, 3)?,
        mfr: mfr_with(rs, opts.mfr_mode)?,
        per_commit_first_rank: first_ranks(rs)?,
        classification: if opts.classification {
            Some((1..=3).map(|k| classification_at_k(rs, k)).collect::<Result<_>>()?)
        } else {
            None
        },
    })
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    if jobs <= 1 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

pub fn rank_all(model: &TrainedModel, graphs: &[EmbeddedGraph], jobs: usize) -> Result<Vec<CommitRanking>> {
    let rank_one = |eg: &EmbeddedGraph| -> Result<CommitRanking> {
        let ranked = rank_commit(model, eg)?;
        Ok(CommitRanking {
            commit_id: eg.graph.commit_id.clone(),
            ranked: ranked.into_iter().map(|(id, _)| id).collect(),
            truth: eg.graph.root_causes().collect(),
        })
    };
    if jobs <= 1 {
        graphs.iter().map(rank_one).collect()
    } else {
        in_pool(jobs, || graphs.par_iter().map(rank_one).collect())
    }
}

pub fn evaluate(model: &TrainedModel, graphs: &[EmbeddedGraph], opts: &EvalOptions) -> Result<EvalReport> {
    let rankings = rank_all(model, graphs, opts.jobs)?;
    report_from_rankings(&rankings, opts)
}

/// Partitions commit ids into `k` disjoint folds.
///
/// By default ids are shuffled with `seed` and dealt round-robin. With
/// `chronological` set and a timestamp on every graph, ids are sorted by
/// timestamp (ties by commit id) and cut into contiguous folds, the first
/// `len % k` one larger.
pub fn kfold_split(graphs: &[EmbeddedGraph], k: usize, seed: u64, chronological: bool) -> Result<Vec<Vec<String>>> {
    if k < 2 {
        return Err(Error::Evaluation(format!("k must be at least 2, got {k}")));
    }
    if graphs.len() < k {
        return Err(Error::Evaluation(format!(
            "{} graphs cannot fill {k} folds",
            graphs.len()
        )));
    }
    let mut folds = vec![Vec::new(); k];
    let timed: Option<Vec<(i64, String)>> = graphs
        .iter()
        .map(|eg| eg.graph.timestamp.map(|ts| (ts, eg.graph.commit_id.clone())))
        .collect();
    if let (true, Some(mut keyed)) = (chronological, timed) {
        keyed.sort();
        let (base, extra) = (keyed.len() / k, keyed.len() % k);
        let mut it = keyed.into_iter();
        for (f, fold) in folds.iter_mut().enumerate() {
            let size = base + usize::from(f < extra);
            fold.extend(it.by_ref().take(size).map(|(_, id)| id));
        }
    } else {
        let mut idx: Vec<usize> = (0..graphs.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        for (pos, i) in idx.into_iter().enumerate() {
            folds[pos % k].push(graphs[i].graph.commit_id.clone());
        }
    }
    Ok(folds)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    #[serde(flatten)]
    pub mean: EvalReport,
    pub per_fold: Vec<EvalReport>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    pub chronological: bool,
    pub eval: EvalOptions,
}

/// Trains on `k - 1` folds and evaluates on the held-out fold, for every fold.
pub fn cross_validate(graphs: &[EmbeddedGraph], cfg: &ModelConfig, opts: &CvOptions) -> Result<CvReport> {
    let folds = kfold_split(graphs, opts.k, opts.seed, opts.chronological)?;
    let fold_of: HashMap<&str, usize> = folds
        .iter()
        .enumerate()
        .flat_map(|(f, ids)| ids.iter().map(move |id| (id.as_str(), f)))
        .collect();
    let inner = EvalOptions { jobs: 1, ..opts.eval };
    let run_fold = |f: usize| -> Result<EvalReport> {
        let (test, train_set): (Vec<_>, Vec<_>) = graphs
            .iter()
            .cloned()
            .partition(|eg| fold_of[eg.graph.commit_id.as_str()] == f);
        let model = train(&train_set, cfg)?;
        evaluate(&model, &test, &inner)
    };
    let per_fold: Vec<EvalReport> = if opts.eval.jobs <= 1 {
        (0..opts.k).map(run_fold).collect::<Result<_>>()?
    } else {
        in_pool(opts.eval.jobs, || {
            (0..opts.k).into_par_iter().map(run_fold).collect::<Result<_>>()
        })?
    };
    Ok(CvReport {
        mean: EvalReport::mean(&per_fold),
        per_fold,
    })
}

/// Cross-validates each component configuration.
pub fn ablation_sweep(graphs: &[EmbeddedGraph], cfg: &ModelConfig, opts: &CvOptions) -> Result<Vec<(Mode, CvReport)>> {
    Mode::ALL
        .into_iter()
        .map(|mode| {
            let c = ModelConfig { mode, ..cfg.clone() };
            Ok((mode, cross_validate(graphs, &c, opts)?))
        })
        .collect()
}

/// Trains on one set of projects and evaluates on another.
pub fn cross_project(
    train_set: &[EmbeddedGraph],
    test_set: &[EmbeddedGraph],
    cfg: &ModelConfig,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let model = train(train_set, cfg)?;
    evaluate(&model, test_set, opts)
}

/// Aligned text table with one row per `(label, report)`.
pub fn render_table(rows: &[(String, &EvalReport)]) -> String {
    let width = rows
        .iter()
        .map(|(l, _)| l.len())
        .max()
        .unwrap_or(0)
        .max("Approach".len());
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>8}  {:>8}  {:>8}  {:>7}",
        "Approach", "Recall@1", "Recall@2", "Recall@3", "MFR"
    );
    for (label, r) in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>8.3}  {:>8.3}  {:>8.3}  {:>7.3}",
            label, r.recall_at_1, r.recall_at_2, r.recall_at_3, r.mfr
        );
    }
    if let Some((_, r)) = rows.iter().find(|(_, r)| r.classification.is_some()) {
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<5}  {:>9}  {:>7}  {:>7}", "top-k", "precision", "recall", "f1");
        for c in r.classification.as_ref().unwrap() {
            let _ = writeln!(
                out,
                "{:<5}  {:>9.3}  {:>7.3}  {:>7.3}",
                c.k, c.precision, c.recall, c.f1
            );
        }
    }
    out
}
