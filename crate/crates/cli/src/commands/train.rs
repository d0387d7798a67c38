use std::path::PathBuf;

use clap::Args;
use powermap::features::{featurize_split, FeatureMatrix};
use powermap::metrics::EvalReport;
use powermap::surrogate::{sweep_learning_rate, train_pnn, NetworkCheckpoint, SweepResult, Task, DEFAULT_LR_GRID};
use serde::{Deserialize, Serialize};

use super::{eval_rng, score_checkpoint, task_kind, ReportContext};
use crate::config::Config;
use crate::error::{runtime, CliResult};
use crate::io::{manifest_path, split_indices, write_json, write_text, Dataset, Split};

#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    /// Dataset CSV [default: <output_dir>/dataset.csv].
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Checkpoint JSON to write [default: <output_dir>/checkpoint.json].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Evaluation report to write [default: <output_dir>/train_report.json].
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Split bookkeeping written next to a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainManifest {
    pub dataset: String,
    pub rows_total: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub compute_calls: u64,
    pub total_calls: u64,
    pub call_ratio: f64,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr_sweep: Option<Vec<SweepResult>>,
}

pub struct TrainOutcome {
    pub checkpoint: NetworkCheckpoint,
    pub report: EvalReport,
    pub manifest: TrainManifest,
}

/// Training targets, refusing a single-class classification split.
pub fn targets(task: Task, train: &FeatureMatrix) -> CliResult<Vec<f64>> {
    let y = task.targets(&train.power);
    if let Task::Classify { boundary } = task {
        let positives = y.iter().filter(|v| **v > 0.5).count();
        if positives == 0 || positives == y.len() {
            return Err(runtime(format!(
                "training split has a single class at boundary {boundary} ({positives} of {} rows above it)",
                y.len()
            )));
        }
    }
    Ok(y)
}

/// The split every command uses for `cfg` on a dataset of `n` rows.
pub fn config_split(cfg: &Config, n: usize) -> CliResult<Split> {
    split_indices(n, cfg.split.train_fraction, cfg.split_seed())
}

pub fn train_dataset(cfg: &Config, ds: &Dataset) -> CliResult<TrainOutcome> {
    let split = config_split(cfg, ds.rows.len())?;
    let (pca, train, test) = featurize_split(&ds.select(&split.train), &ds.select(&split.test), cfg.train.variance_target)?;
    let task = cfg.train.config.task;
    let y = targets(task, &train)?;
    let (mut checkpoint, sweep) = if cfg.train.lr_sweep {
        let (c, s) = sweep_learning_rate(train.schema, &train.rows, &y, &cfg.train.config, cfg.seed, &DEFAULT_LR_GRID)?;
        (c, Some(s))
    } else {
        (train_pnn(train.schema, &train.rows, &y, &cfg.train.config, cfg.seed)?, None)
    };
    checkpoint.pca = Some(pca);
    let metrics = score_checkpoint(&checkpoint, task, &test, cfg.eval.js_form, &mut eval_rng(cfg.seed, 0))?;
    let ctx = ReportContext { config: cfg, dataset: ds, split: &split };
    let report = ctx.report(task_kind(task), "pnn", metrics, split.train.len());
    let manifest = TrainManifest {
        dataset: ds.id.clone(),
        rows_total: ds.rows.len(),
        train_rows: split.train.len(),
        test_rows: split.test.len(),
        train_fraction: cfg.split.train_fraction,
        split_seed: cfg.split_seed(),
        compute_calls: report.compute_calls,
        total_calls: report.total_calls,
        call_ratio: report.call_ratio,
        config_hash: report.config_hash.clone(),
        lr_sweep: sweep,
    };
    Ok(TrainOutcome { checkpoint, report, manifest })
}

pub fn run(cfg: &Config, args: &TrainArgs) -> CliResult<()> {
    let ds = Dataset::load(&cfg.output_path(args.dataset.as_deref(), "dataset.csv"))?;
    let outcome = train_dataset(cfg, &ds)?;
    let out = cfg.output_path(args.out.as_deref(), "checkpoint.json");
    write_text(&out, &(outcome.checkpoint.to_json()? + "\n"))?;
    write_json(&manifest_path(&out), &outcome.manifest)?;
    write_json(&cfg.output_path(args.report.as_deref(), "train_report.json"), &outcome.report)?;
    print_metrics("train", &outcome.report);
    Ok(())
}

pub(crate) fn print_metrics(cmd: &str, report: &EvalReport) {
    let parts: Vec<String> = report
        .metrics
        .iter()
        .map(|(k, e)| format!("{k}={:.4} [{:.4}, {:.4}]", e.value, e.ci_low, e.ci_high))
        .collect();
    crate::say(format_args!("{cmd}: {} {} (call ratio {:.4})", report.predictor, parts.join(" "), report.call_ratio));
}
