use std::path::PathBuf;

use clap::Args;
use powermap::features::featurize_split;
use powermap::metrics::EvalReport;
use powermap::surrogate::{fine_tune, train_pnn, transfer_init, NetworkCheckpoint};

use super::train::{config_split, print_metrics, targets};
use super::{eval_rng, score_checkpoint, task_kind, ReportContext};
use crate::config::Config;
use crate::error::{runtime, CliResult};
use crate::io::{file_id, read_text, write_json, write_text, Dataset};

#[derive(Debug, Clone, Default, Args)]
pub struct TransferArgs {
    /// Parent checkpoint JSON.
    #[arg(long)]
    pub parent: PathBuf,
    /// Child dataset CSV [default: <output_dir>/dataset.csv].
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Fine-tuned checkpoint to write [default: <output_dir>/transfer_checkpoint.json].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Reports (transfer, then fresh control) [default: <output_dir>/transfer_report.json].
    #[arg(long)]
    pub report: Option<PathBuf>,
}

pub struct TransferOutcome {
    pub checkpoint: NetworkCheckpoint,
    pub control: NetworkCheckpoint,
    /// Transfer report, then the fresh-control report on the identical split.
    pub reports: Vec<EvalReport>,
}

pub fn transfer_dataset(cfg: &Config, parent: &NetworkCheckpoint, parent_id: &str, ds: &Dataset) -> CliResult<TransferOutcome> {
    let split = config_split(cfg, ds.rows.len())?;
    let (pca, train, test) = featurize_split(&ds.select(&split.train), &ds.select(&split.test), cfg.train.variance_target)?;
    let task = cfg.train.config.task;
    let y = targets(task, &train)?;
    let init = transfer_init(parent, train.schema, parent_id)?;
    let mut checkpoint = fine_tune(&init, &train.rows, &y, &cfg.train.config, cfg.seed)?;
    checkpoint.pca = Some(pca.clone());
    let mut control = train_pnn(train.schema, &train.rows, &y, &cfg.train.config, cfg.seed)?;
    control.pca = Some(pca);

    let ctx = ReportContext { config: cfg, dataset: ds, split: &split };
    let mut reports = Vec::new();
    for (i, (ckpt, name)) in [(&checkpoint, "pnn_transfer"), (&control, "pnn_control")].into_iter().enumerate() {
        let metrics = score_checkpoint(ckpt, task, &test, cfg.eval.js_form, &mut eval_rng(cfg.seed, i as u64))?;
        let mut r = ctx.report(task_kind(task), name, metrics, split.train.len());
        if i == 0 {
            r.notes.push(format!("parent {parent_id}"));
        }
        reports.push(r);
    }
    Ok(TransferOutcome { checkpoint, control, reports })
}

pub fn run(cfg: &Config, args: &TransferArgs) -> CliResult<()> {
    let parent_text = read_text(&args.parent)?;
    let parent = NetworkCheckpoint::from_json(&parent_text).map_err(|e| runtime(format!("{}: {e}", args.parent.display())))?;
    let parent_id = file_id(&args.parent, &parent_text);
    let ds = Dataset::load(&cfg.output_path(args.dataset.as_deref(), "dataset.csv"))?;
    let outcome = transfer_dataset(cfg, &parent, &parent_id, &ds)?;
    let out = cfg.output_path(args.out.as_deref(), "transfer_checkpoint.json");
    write_text(&out, &(outcome.checkpoint.to_json()? + "\n"))?;
    write_json(&cfg.output_path(args.report.as_deref(), "transfer_report.json"), &outcome.reports)?;
    for r in &outcome.reports {
        print_metrics("transfer", r);
    }
    Ok(())
}
