use std::path::{Path, PathBuf};

use clap::Args;
use powermap::features::{assemble_features, FeatureMatrix};
use powermap::metrics::{cascade_evaluate, EvalReport, TaskKind};
use powermap::surrogate::{classify, NetworkCheckpoint, Task};

use super::train::{config_split, print_metrics};
use super::{eval_rng, score_checkpoint, score_labels, task_kind, ReportContext};
use crate::config::Config;
use crate::error::{config_err, runtime, CliResult};
use crate::io::{read_text, write_json, Dataset};

#[derive(Debug, Clone, Default, Args)]
pub struct EvalArgs {
    /// Dataset CSV [default: <output_dir>/dataset.csv].
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Single checkpoint to score on the held-out split.
    #[arg(long, conflicts_with_all = ["c1", "c2"])]
    pub checkpoint: Option<PathBuf>,
    /// Cascade: the high-boundary classifier.
    #[arg(long, requires = "c2")]
    pub c1: Option<PathBuf>,
    /// Cascade: the lower-boundary classifier, scored where C1 says "not high".
    #[arg(long, requires = "c1")]
    pub c2: Option<PathBuf>,
    /// Report JSON [default: <output_dir>/eval_report.json].
    #[arg(long)]
    pub report: Option<PathBuf>,
}

pub fn load_checkpoint(path: &Path) -> CliResult<NetworkCheckpoint> {
    NetworkCheckpoint::from_json(&read_text(path)?).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn test_features(ckpt: &NetworkCheckpoint, rows: &[powermap::features::DatasetRow]) -> CliResult<FeatureMatrix> {
    let pca = ckpt.pca.as_ref().ok_or_else(|| runtime("checkpoint stores no PCA model; retrain it with `train`"))?;
    Ok(assemble_features(rows, pca)?)
}

fn checkpoint_task(ckpt: &NetworkCheckpoint, fallback: Task) -> Task {
    ckpt.training_meta.as_ref().map_or(fallback, |m| m.task)
}

pub fn eval_single(cfg: &Config, ds: &Dataset, ckpt: &NetworkCheckpoint) -> CliResult<EvalReport> {
    let split = config_split(cfg, ds.rows.len())?;
    let test = test_features(ckpt, &ds.select(&split.test))?;
    let task = checkpoint_task(ckpt, cfg.train.config.task);
    let metrics = score_checkpoint(ckpt, task, &test, cfg.eval.js_form, &mut eval_rng(cfg.seed, 20))?;
    let ctx = ReportContext { config: cfg, dataset: ds, split: &split };
    Ok(ctx.report(task_kind(task), "pnn", metrics, split.train.len()))
}

fn boundary(ckpt: &NetworkCheckpoint, fallback: f64) -> f64 {
    match checkpoint_task(ckpt, Task::Classify { boundary: fallback }) {
        Task::Classify { boundary } => boundary,
        Task::Regress => fallback,
    }
}

/// C1 on every held-out row, C2 on the rows C1 did not call high.
pub fn eval_cascade(cfg: &Config, ds: &Dataset, c1: &NetworkCheckpoint, c2: &NetworkCheckpoint) -> CliResult<Vec<EvalReport>> {
    for c in [c1, c2] {
        if let Task::Regress = checkpoint_task(c, cfg.train.config.task) {
            return Err(config_err("cascade evaluation needs two classification checkpoints"));
        }
    }
    let split = config_split(cfg, ds.rows.len())?;
    let rows = ds.select(&split.test);
    let f1 = test_features(c1, &rows)?;
    let f2 = test_features(c2, &rows)?;
    let (b1, b2) = (boundary(c1, cfg.eval.c1_boundary), boundary(c2, cfg.eval.c2_boundary));
    let p1 = classify(c1, &f1.rows)?;
    let p2 = classify(c2, &f2.rows)?;
    let cascade = cascade_evaluate(&p1, &p2, &f1.power, b1, b2)?;
    let ctx = ReportContext { config: cfg, dataset: ds, split: &split };
    let task = TaskKind::Cascade { c1: b1, c2: b2 };

    let m1 = score_labels(&p1, &f1.power, b1, &mut eval_rng(cfg.seed, 21))?;
    let mut r1 = ctx.report(task.clone(), "pnn_c1", m1, split.train.len());
    r1.notes.push(format!("C1 scored on all {} held-out rows at boundary {b1}", rows.len()));

    let sub_pred: Vec<u8> = cascade.c2_rows.iter().map(|&i| p2[i]).collect();
    let sub_power: Vec<f64> = cascade.c2_rows.iter().map(|&i| f1.power[i]).collect();
    let m2 = score_labels(&sub_pred, &sub_power, b2, &mut eval_rng(cfg.seed, 22))?;
    let mut r2 = ctx.report(task, "pnn_c2", m2, split.train.len());
    r2.notes.push(format!("C2 scored on the {} rows C1 predicted at or below {b1}", cascade.c2_rows.len()));
    if cascade.c2.degenerate {
        r2.notes.push("degenerate: C1 predicted every row high, C2 had nothing to score".into());
    }
    Ok(vec![r1, r2])
}

pub fn run(cfg: &Config, args: &EvalArgs) -> CliResult<()> {
    if args.checkpoint.is_none() && args.c1.is_none() {
        return Err(config_err("eval needs --checkpoint, or both --c1 and --c2"));
    }
    let ds = Dataset::load(&cfg.output_path(args.dataset.as_deref(), "dataset.csv"))?;
    let out = cfg.output_path(args.report.as_deref(), "eval_report.json");
    let reports = match (&args.checkpoint, &args.c1, &args.c2) {
        (Some(path), None, None) => {
            let r = eval_single(cfg, &ds, &load_checkpoint(path)?)?;
            write_json(&out, &r)?;
            vec![r]
        }
        (None, Some(a), Some(b)) => {
            let rs = eval_cascade(cfg, &ds, &load_checkpoint(a)?, &load_checkpoint(b)?)?;
            write_json(&out, &rs)?;
            rs
        }
        _ => return Err(config_err("eval needs --checkpoint, or both --c1 and --c2")),
    };
    for r in &reports {
        print_metrics("eval", r);
    }
    Ok(())
}
