//! Subcommand implementations. Each `*_dataset`-style function is the
//! in-memory core; `run` wraps it with file input and output.

pub mod baseline;
pub mod eval;
pub mod plot;
pub mod sample;
pub mod simulate;
pub mod train;
pub mod transfer;

use std::collections::BTreeMap;

use powermap::features::{classify_power, FeatureMatrix};
use powermap::metrics::{f1_with_ci, js_with_ci, Estimate, EvalReport, JsForm, TaskKind, CI_METHOD};
use powermap::rng::{RngStream, StreamRng};
use powermap::surrogate::{classify, predict, NetworkCheckpoint, Task};
use rand::Rng;

use crate::config::Config;
use crate::error::CliResult;
use crate::io::{Dataset, Split};

/// Stream tags, kept apart from the per-point simulation streams.
pub(crate) const SAMPLE_TAG: u64 = u64::MAX;
pub(crate) const EVAL_TAG: u64 = 0x4556_414c;
pub(crate) const BASELINE_TAG: u64 = 0x4241_5345;

pub(crate) fn eval_rng(seed: u64, which: u64) -> StreamRng {
    RngStream::with_path(seed, &[EVAL_TAG, which]).generator()
}

fn exact(value: f64) -> Estimate {
    Estimate { value, ci_low: value, ci_high: value }
}

/// F1 and accuracy with bootstrap intervals.
pub fn score_labels(predicted: &[u8], power: &[f64], boundary: f64, rng: &mut StreamRng) -> CliResult<BTreeMap<String, Estimate>> {
    let truth = classify_power(power, boundary);
    let mut m = BTreeMap::new();
    if predicted.is_empty() {
        m.insert("f1".into(), exact(0.0));
        m.insert("accuracy".into(), exact(0.0));
        return Ok(m);
    }
    let (f1, acc) = f1_with_ci(predicted, &truth, rng)?;
    m.insert("f1".into(), f1);
    m.insert("accuracy".into(), acc);
    Ok(m)
}

/// JS divergence of predicted against true power, alongside a uniform
/// random predictor on the same rows.
pub fn score_powers(predicted: &[f64], power: &[f64], form: JsForm, rng: &mut StreamRng) -> CliResult<BTreeMap<String, Estimate>> {
    let mut m = BTreeMap::new();
    let js = js_with_ci(predicted, power, form, rng)?;
    let random: Vec<f64> = (0..power.len()).map(|_| rng.random::<f64>()).collect();
    let js_random = js_with_ci(&random, power, form, rng)?;
    let mse = predicted.iter().zip(power).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / power.len() as f64;
    m.insert("js_ratio".into(), exact(if js.value > 0.0 { js_random.value / js.value } else { f64::INFINITY }));
    m.insert("js".into(), js);
    m.insert("js_random".into(), js_random);
    m.insert("mse".into(), exact(mse));
    Ok(m)
}

pub fn task_kind(task: Task) -> TaskKind {
    match task {
        Task::Classify { boundary } => TaskKind::Classify { boundary },
        Task::Regress => TaskKind::Regress,
    }
}

/// Score a checkpoint on already-featurized rows.
pub fn score_checkpoint(
    ckpt: &NetworkCheckpoint,
    task: Task,
    test: &FeatureMatrix,
    form: JsForm,
    rng: &mut StreamRng,
) -> CliResult<BTreeMap<String, Estimate>> {
    match task {
        Task::Classify { boundary } => score_labels(&classify(ckpt, &test.rows)?, &test.power, boundary, rng),
        Task::Regress => score_powers(&predict(ckpt, &test.rows)?, &test.power, form, rng),
    }
}

pub struct ReportContext<'a> {
    pub config: &'a Config,
    pub dataset: &'a Dataset,
    pub split: &'a Split,
}

impl ReportContext<'_> {
    /// Report for a predictor whose training consumed `label_rows` simulated rows.
    pub fn report(&self, task: TaskKind, predictor: &str, metrics: BTreeMap<String, Estimate>, label_rows: usize) -> EvalReport {
        let total_calls = self.dataset.total_calls();
        let compute_calls = self.dataset.calls_for(label_rows);
        EvalReport {
            task,
            predictor: predictor.into(),
            metrics,
            ci_method: CI_METHOD.into(),
            train_rows: self.split.train.len(),
            test_rows: self.split.test.len(),
            compute_calls,
            total_calls,
            call_ratio: if total_calls > 0 { compute_calls as f64 / total_calls as f64 } else { 0.0 },
            dataset: self.dataset.id.clone(),
            config_hash: self.config.hash(),
            notes: Vec::new(),
        }
    }
}
