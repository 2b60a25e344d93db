//! `rcd`: generate, train, evaluate, rank and gradient-check from the command line.
//!
//! Every option can also come from a flat `key = value` file passed with
//! `--config`; flags win over the file, the file wins over built-in defaults.

pub mod overlay;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rcd_core::checkpoint;
use rcd_core::diagnostics::fixture_check;
use rcd_core::embedding::precomputed_dim;
use rcd_core::evaluation::{ablation_sweep, cross_project, cross_validate, evaluate, render_table};
use rcd_core::{
    embed_dataset, generate, load_dataset, rank_commit, train_with_progress, CvOptions, Dataset, EmbeddedGraph,
    EvalOptions, GenConfig, HashingEmbedder, LabelPolicy, MfrMode, Mode, ModelConfig, StepGranularity,
};

use crate::overlay::Overlay;

/// Bad invocation; exits with status 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Process exit status for a failed run.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        2
    } else {
        1
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "rcd",
    version,
    about = "Rank the deleted lines of bug-fixing commits by root-cause likelihood"
)]
pub struct Cli {
    /// Flat key = value file with option defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset with a planted root-cause signal.
    Generate(GenerateArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Report Recall@1/2/3 and MFR for a checkpoint, or cross-validate.
    Evaluate(EvaluateArgs),
    /// Print every commit's deleted lines, most likely root cause first.
    Rank(RankArgs),
    /// Compare analytic and finite-difference gradients of the full loss.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub commits: Option<usize>,
    /// Deleted lines per commit.
    #[arg(long)]
    pub deleted: Option<usize>,
    /// Added lines per commit.
    #[arg(long)]
    pub added: Option<usize>,
    #[arg(long)]
    pub edge_density: Option<f64>,
    /// Probability that a commit keeps its planted signal; 0 gives baseline-difficulty data.
    #[arg(long)]
    pub signal: Option<f64>,
    /// Keep the signal only in graph structure, not in root-cause text.
    #[arg(long)]
    pub structure_only: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// Embedding width; defaults to the dataset's precomputed width, else 64.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub out_dim: Option<usize>,
    /// full, aggregation-only or retention-only.
    #[arg(long)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also train on pairs of equally labeled lines (target 0.5).
    #[arg(long)]
    pub include_ties: bool,
    /// Optimizer step per `commit` or per `pair`.
    #[arg(long)]
    pub step: Option<StepGranularity>,
}

impl ModelArgs {
    fn resolve(&self, o: &Overlay, base: ModelConfig, data_dim: Option<usize>) -> Result<ModelConfig, UsageError> {
        Ok(ModelConfig {
            dim: o.pick(self.dim, "dim", data_dim.unwrap_or(base.dim))?,
            heads: o.pick(self.heads, "heads", base.heads)?,
            layers: o.pick(self.layers, "layers", base.layers)?,
            out_dim: o.pick(self.out_dim, "out_dim", base.out_dim)?,
            mode: o.pick(self.mode, "mode", base.mode)?,
            lr: o.pick(self.lr, "lr", base.lr)?,
            epochs: o.pick(self.epochs, "epochs", base.epochs)?,
            sigma: o.pick(self.sigma, "sigma", base.sigma)?,
            seed: o.pick(self.seed, "seed", base.seed)?,
            include_tie_pairs: o.switch(self.include_ties, "include_ties")?,
            step: o.pick(self.step, "step", base.step)?,
        })
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(short, long)]
    pub data: PathBuf,
    /// Checkpoint path.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Also write the epoch,mean_loss log here.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(short, long)]
    pub data: PathBuf,
    /// Checkpoint to evaluate. Not used with --cv or --train-data.
    #[arg(short = 'm', long)]
    pub model: Option<PathBuf>,
    /// Run k-fold cross-validation on --data instead of loading a checkpoint.
    #[arg(long, value_name = "K")]
    pub cv: Option<usize>,
    /// With --cv: cut folds in timestamp order.
    #[arg(long)]
    pub chronological: bool,
    /// With --cv: repeat for every mode.
    #[arg(long)]
    pub ablation: bool,
    /// Train on this dataset and evaluate on --data.
    #[arg(long, value_name = "FILE")]
    pub train_data: Option<PathBuf>,
    /// Add precision, recall and F1 at k = 1, 2, 3.
    #[arg(long)]
    pub classification: bool,
    /// Average every truth line's rank instead of the first one's.
    #[arg(long)]
    pub all_defects: bool,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// JSON report path.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub train: ModelArgs,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(short, long)]
    pub data: PathBuf,
    #[arg(short = 'm', long)]
    pub model: PathBuf,
    /// Add an is_root_cause column.
    #[arg(long)]
    pub show_truth: bool,
    /// CSV path; standard output if omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Pass threshold on the worst relative error.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Central-difference step.
    #[arg(long)]
    pub fd_step: Option<f64>,
    /// Print every tensor's error.
    #[arg(short, long)]
    pub verbose: bool,
    #[command(flatten)]
    pub model: ModelArgs,
}

pub const DEFAULT_TOLERANCE: f64 = 1e-5;
pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// Console streams of a run.
pub struct Io<'a> {
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

/// Runs one command. `Ok(1)` means a check ran and failed.
pub fn run(cli: Cli, io: &mut Io<'_>) -> anyhow::Result<u8> {
    let overlay = Overlay::load(cli.config.as_deref())?;
    match cli.command {
        Command::Generate(a) => cmd_generate(&a, &overlay, io),
        Command::Train(a) => cmd_train(&a, &overlay, io),
        Command::Evaluate(a) => cmd_evaluate(&a, &overlay, io),
        Command::Rank(a) => cmd_rank(&a, io),
        Command::Gradcheck(a) => cmd_gradcheck(&a, &overlay, io),
    }
}

pub fn cmd_generate(a: &GenerateArgs, o: &Overlay, io: &mut Io<'_>) -> anyhow::Result<u8> {
    let d = GenConfig::default();
    let cfg = GenConfig {
        n_commits: o.pick(a.commits, "commits", d.n_commits)?,
        deleted_per_commit: o.pick(a.deleted, "deleted", d.deleted_per_commit)?,
        added_per_commit: o.pick(a.added, "added", d.added_per_commit)?,
        edge_density: o.pick(a.edge_density, "edge_density", d.edge_density)?,
        signal_strength: o.pick(a.signal, "signal", d.signal_strength)?,
        seed: o.pick(a.seed, "seed", d.seed)?,
        structure_only: o.switch(a.structure_only, "structure_only")?,
    };
    let ds = generate(&cfg)?;
    ds.save(&a.output)?;
    writeln!(io.err, "wrote {} commits to {}", ds.graphs.len(), a.output.display())?;
    Ok(0)
}

fn embed(ds: &Dataset, dim: usize) -> anyhow::Result<Vec<EmbeddedGraph>> {
    if let Some(pre) = precomputed_dim(ds) {
        if pre != dim {
            bail!("model expects D={dim} but the dataset's precomputed embeddings have D={pre}");
        }
    }
    Ok(embed_dataset(ds, &HashingEmbedder::new(dim)?)?)
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn cmd_train(a: &TrainArgs, o: &Overlay, io: &mut Io<'_>) -> anyhow::Result<u8> {
    let ds = load_dataset(&a.data, LabelPolicy::Required)?;
    let cfg = a.model.resolve(o, ModelConfig::default(), precomputed_dim(&ds))?;
    cfg.validate()?;
    let graphs = embed(&ds, cfg.dim)?;

    writeln!(io.out, "epoch,mean_loss")?;
    let mut write_err = None;
    let model = train_with_progress(&graphs, &cfg, |epoch, loss| {
        if let Err(e) = writeln!(io.out, "{epoch},{loss}").and_then(|_| io.out.flush()) {
            write_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    checkpoint::save(&model, &a.output)?;
    if let Some(log) = &a.log {
        write_file(log, &checkpoint::log_csv(&model.training_log))?;
    }
    writeln!(
        io.err,
        "trained on {} commits for {} epochs; checkpoint {}",
        graphs.len(),
        cfg.epochs,
        a.output.display()
    )?;
    Ok(0)
}

pub fn cmd_evaluate(a: &EvaluateArgs, o: &Overlay, io: &mut Io<'_>) -> anyhow::Result<u8> {
    let ds = load_dataset(&a.data, LabelPolicy::Required)?;
    let opts = EvalOptions {
        mfr_mode: if a.all_defects {
            MfrMode::AllDefects
        } else {
            MfrMode::FirstRank
        },
        classification: a.classification,
        jobs: o.pick(a.jobs, "jobs", 1)?,
    };
    if a.model.is_some() && (a.cv.is_some() || a.train_data.is_some()) {
        return Err(UsageError("--model cannot be combined with --cv or --train-data".into()).into());
    }
    if a.ablation && a.cv.is_none() {
        return Err(UsageError("--ablation requires --cv".into()).into());
    }

    let (table, json) = if let Some(k) = a.cv {
        let cfg = a.train.resolve(o, ModelConfig::default(), precomputed_dim(&ds))?;
        cfg.validate()?;
        let graphs = embed(&ds, cfg.dim)?;
        let cv = CvOptions {
            k,
            seed: cfg.seed,
            chronological: a.chronological,
            eval: opts,
        };
        if a.ablation {
            let sweep = ablation_sweep(&graphs, &cfg, &cv)?;
            let rows: Vec<(String, &_)> = sweep.iter().map(|(m, r)| (m.name().to_owned(), &r.mean)).collect();
            let by_mode: Vec<(&str, &_)> = sweep.iter().map(|(m, r)| (m.name(), r)).collect();
            (render_table(&rows), ordered_object(&by_mode)?)
        } else {
            let report = cross_validate(&graphs, &cfg, &cv)?;
            let mut rows: Vec<(String, &_)> = report
                .per_fold
                .iter()
                .enumerate()
                .map(|(i, r)| (format!("fold {}", i + 1), r))
                .collect();
            rows.push(("mean".into(), &report.mean));
            (render_table(&rows), serde_json::to_string_pretty(&report)?)
        }
    } else if let Some(train_path) = &a.train_data {
        let train_ds = load_dataset(train_path, LabelPolicy::Required)?;
        let cfg = a.train.resolve(o, ModelConfig::default(), precomputed_dim(&train_ds))?;
        cfg.validate()?;
        let report = cross_project(&embed(&train_ds, cfg.dim)?, &embed(&ds, cfg.dim)?, &cfg, &opts)?;
        (
            render_table(&[(cfg.mode.name().to_owned(), &report)]),
            serde_json::to_string_pretty(&report)?,
        )
    } else {
        let Some(path) = &a.model else {
            return Err(UsageError("evaluate needs --model, --cv or --train-data".into()).into());
        };
        let model = checkpoint::load(path)?;
        let report = evaluate(&model, &embed(&ds, model.cfg.dim)?, &opts)?;
        (
            render_table(&[(model.cfg.mode.name().to_owned(), &report)]),
            serde_json::to_string_pretty(&report)?,
        )
    };

    write!(io.out, "{table}")?;
    match &a.output {
        Some(path) => write_file(path, &format!("{json}\n"))?,
        None => writeln!(io.out, "\n{json}")?,
    }
    Ok(0)
}

/// JSON object whose keys keep the given order.
fn ordered_object<T: serde::Serialize>(entries: &[(&str, &T)]) -> anyhow::Result<String> {
    let mut out = String::from("{");
    for (i, (key, value)) in entries.iter().enumerate() {
        let body = serde_json::to_string_pretty(value)?.replace('\n', "\n  ");
        out.push_str(&format!(
            "{}\n  {}: {body}",
            if i == 0 { "" } else { "," },
            serde_json::to_string(key)?
        ));
    }
    out.push_str("\n}");
    Ok(out)
}

pub fn cmd_rank(a: &RankArgs, io: &mut Io<'_>) -> anyhow::Result<u8> {
    let ds = load_dataset(&a.data, LabelPolicy::Inference)?;
    let model = checkpoint::load(&a.model)?;
    let graphs = embed(&ds, model.cfg.dim)?;

    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let mut header = vec!["commit_id", "rank", "node_id", "score", "text"];
        if a.show_truth {
            header.push("is_root_cause");
        }
        w.write_record(&header)?;
        let mut ranked_commits = 0;
        for eg in &graphs {
            let g = &eg.graph;
            if g.deleted_ids().next().is_none() {
                writeln!(io.err, "warning: commit {} has no deleted lines; skipped", g.commit_id)?;
                continue;
            }
            for (pos, (id, score)) in rank_commit(&model, eg)?.into_iter().enumerate() {
                let node = &g.nodes[id];
                let mut row = vec![
                    g.commit_id.clone(),
                    (pos + 1).to_string(),
                    id.to_string(),
                    score.to_string(),
                    node.text.clone().unwrap_or_default(),
                ];
                if a.show_truth {
                    row.push(node.is_root_cause.to_string());
                }
                w.write_record(&row)?;
            }
            ranked_commits += 1;
        }
        w.flush()?;
        writeln!(io.err, "{ranked_commits} commits ranked")?;
    }
    match &a.output {
        Some(path) => fs::write(path, &buf).with_context(|| format!("writing {}", path.display()))?,
        None => io.out.write_all(&buf)?,
    }
    Ok(0)
}

pub fn cmd_gradcheck(a: &GradcheckArgs, o: &Overlay, io: &mut Io<'_>) -> anyhow::Result<u8> {
    let small = ModelConfig {
        dim: 8,
        heads: 2,
        layers: 1,
        out_dim: 4,
        ..ModelConfig::default()
    };
    let cfg = a.model.resolve(o, small, None)?;
    cfg.validate()?;
    let tolerance = o.pick(a.tolerance, "tolerance", DEFAULT_TOLERANCE)?;
    let h = o.pick(a.fd_step, "fd_step", DEFAULT_FD_STEP)?;
    let report = fixture_check(&cfg, h)?;
    if a.verbose {
        for (name, err) in &report.per_tensor {
            writeln!(io.out, "{name} {err:.3e}")?;
        }
    }
    let pass = report.max_rel_err < tolerance;
    writeln!(
        io.out,
        "max_rel_err={:.3e} {}",
        report.max_rel_err,
        if pass { "PASS" } else { "FAIL" }
    )?;
    Ok(if pass { 0 } else { 1 })
}
