//! Classification and regression scores, divergences, bootstrap intervals.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const SMOOTHING: f64 = 1e-12;
pub const BOOTSTRAP_RESAMPLES: usize = 1000;

fn same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(invalid(format!("length mismatch: {a} vs {b}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_labels(predicted: &[u8], truth: &[u8]) -> Result<Self> {
        same_len(predicted.len(), truth.len())?;
        let mut c = Confusion::default();
        for (p, t) in predicted.iter().zip(truth) {
            match (*p != 0, *t != 0) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            (2 * self.tp) as f64 / denom as f64
        }
    }

    pub fn accuracy(&self) -> f64 {
        let n = self.tp + self.fp + self.tn + self.fn_;
        if n == 0 {
            0.0
        } else {
            (self.tp + self.tn) as f64 / n as f64
        }
    }
}

/// 2TP / (2TP + FP + FN), or 0 when nothing is positive.
pub fn f1_score(predicted: &[u8], truth: &[u8]) -> Result<f64> {
    if predicted.is_empty() {
        return Err(invalid("f1 needs at least one label"));
    }
    Ok(Confusion::from_labels(predicted, truth)?.f1())
}

pub fn accuracy(predicted: &[u8], truth: &[u8]) -> Result<f64> {
    if predicted.is_empty() {
        return Err(invalid("accuracy needs at least one label"));
    }
    Ok(Confusion::from_labels(predicted, truth)?.accuracy())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageScore {
    pub boundary: f64,
    pub rows: usize,
    pub f1: f64,
    pub accuracy: f64,
    /// Set when the stage had no rows to score.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeReport {
    pub c1: StageScore,
    pub c2: StageScore,
    /// Test-row indices handed to C2.
    pub c2_rows: Vec<usize>,
}

fn stage(boundary: f64, predicted: &[u8], power: &[f64]) -> Result<StageScore> {
    let truth: Vec<u8> = power.iter().map(|p| u8::from(*p > boundary)).collect();
    let c = Confusion::from_labels(predicted, &truth)?;
    Ok(StageScore { boundary, rows: predicted.len(), f1: c.f1(), accuracy: c.accuracy(), degenerate: predicted.is_empty() })
}

/// Two-boundary evaluation. `c1` and `c2` hold each classifier's
/// predictions on every test row; C2 is scored only where C1 said "low".
pub fn cascade_evaluate(c1: &[u8], c2: &[u8], power: &[f64], b1: f64, b2: f64) -> Result<CascadeReport> {
    same_len(c1.len(), power.len())?;
    same_len(c2.len(), power.len())?;
    let c2_rows: Vec<usize> = (0..c1.len()).filter(|&i| c1[i] == 0).collect();
    let sub_pred: Vec<u8> = c2_rows.iter().map(|&i| c2[i]).collect();
    let sub_power: Vec<f64> = c2_rows.iter().map(|&i| power[i]).collect();
    Ok(CascadeReport { c1: stage(b1, c1, power)?, c2: stage(b2, &sub_pred, &sub_power)?, c2_rows })
}

/// Add 1e-12 to every entry and normalize.
pub fn power_vector_to_distribution(powers: &[f64]) -> Result<Vec<f64>> {
    if powers.is_empty() {
        return Err(invalid("empty power vector"));
    }
    if powers.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(invalid("power values must lie in [0, 1]"));
    }
    smooth(powers, SMOOTHING)
}

fn smooth(v: &[f64], eps: f64) -> Result<Vec<f64>> {
    if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(invalid("probability entries must be finite and nonnegative"));
    }
    let total: f64 = v.iter().map(|x| x + eps).sum();
    Ok(v.iter().map(|x| (x + eps) / total).collect())
}

fn kl_smoothed(a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = a.iter().zip(b).filter(|(x, _)| **x > 0.0).map(|(x, y)| x * (x / y).ln()).sum();
    s.max(0.0)
}

/// KL(A||B) in nats after epsilon smoothing of both arguments.
pub fn kl_divergence_eps(a: &[f64], b: &[f64], eps: f64) -> Result<f64> {
    same_len(a.len(), b.len())?;
    if a.is_empty() {
        return Err(invalid("empty distributions"));
    }
    Ok(kl_smoothed(&smooth(a, eps)?, &smooth(b, eps)?))
}

pub fn kl_divergence(a: &[f64], b: &[f64]) -> Result<f64> {
    kl_divergence_eps(a, b, SMOOTHING)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JsForm {
    /// (KL(A||B) + KL(B||A)) / 2.
    #[default]
    Symmetrized,
    /// Divergence of each side from the midpoint mixture; bounded by ln 2.
    Mixture,
}

pub fn js_divergence_with(a: &[f64], b: &[f64], form: JsForm, eps: f64) -> Result<f64> {
    same_len(a.len(), b.len())?;
    if a.is_empty() {
        return Err(invalid("empty distributions"));
    }
    let (a, b) = (smooth(a, eps)?, smooth(b, eps)?);
    Ok(match form {
        JsForm::Symmetrized => 0.5 * (kl_smoothed(&a, &b) + kl_smoothed(&b, &a)),
        JsForm::Mixture => {
            let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            0.5 * (kl_smoothed(&a, &m) + kl_smoothed(&b, &m))
        }
    })
}

pub fn js_divergence(a: &[f64], b: &[f64]) -> Result<f64> {
    js_divergence_with(a, b, JsForm::Symmetrized, SMOOTHING)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile bootstrap over row indices. `statistic` receives a resampled
/// index set; the point estimate uses the identity sample. The interval is
/// widened if needed so it always contains the point estimate.
pub fn bootstrap<F, R>(n: usize, statistic: F, resamples: usize, rng: &mut R) -> Result<Estimate>
where
    F: Fn(&[usize]) -> f64,
    R: Rng + ?Sized,
{
    if n == 0 || resamples == 0 {
        return Err(invalid("bootstrap needs rows and resamples"));
    }
    let all: Vec<usize> = (0..n).collect();
    let value = statistic(&all);
    let mut idx = vec![0; n];
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            for slot in idx.iter_mut() {
                *slot = rng.random_range(0..n);
            }
            statistic(&idx)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    Ok(Estimate {
        value,
        ci_low: percentile(&stats, 0.025).min(value),
        ci_high: percentile(&stats, 0.975).max(value),
    })
}

/// 95% bootstrap interval for the mean of `samples`.
pub fn confidence_interval_95<R: Rng + ?Sized>(samples: &[f64], rng: &mut R) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(invalid("confidence interval needs at least 2 samples"));
    }
    let mean = |idx: &[usize]| idx.iter().map(|&i| samples[i]).sum::<f64>() / idx.len() as f64;
    let e = bootstrap(samples.len(), mean, BOOTSTRAP_RESAMPLES, rng)?;
    Ok((e.ci_low, e.ci_high))
}

pub fn f1_with_ci<R: Rng + ?Sized>(predicted: &[u8], truth: &[u8], rng: &mut R) -> Result<(Estimate, Estimate)> {
    same_len(predicted.len(), truth.len())?;
    let pick = |idx: &[usize]| {
        let p: Vec<u8> = idx.iter().map(|&i| predicted[i]).collect();
        let t: Vec<u8> = idx.iter().map(|&i| truth[i]).collect();
        Confusion::from_labels(&p, &t).expect("equal lengths")
    };
    let f1 = bootstrap(predicted.len(), |idx| pick(idx).f1(), BOOTSTRAP_RESAMPLES, rng)?;
    let acc = bootstrap(predicted.len(), |idx| pick(idx).accuracy(), BOOTSTRAP_RESAMPLES, rng)?;
    Ok((f1, acc))
}

pub fn js_with_ci<R: Rng + ?Sized>(predicted: &[f64], truth: &[f64], form: JsForm, rng: &mut R) -> Result<Estimate> {
    same_len(predicted.len(), truth.len())?;
    let js = |idx: &[usize]| {
        let p: Vec<f64> = idx.iter().map(|&i| predicted[i].clamp(0.0, 1.0)).collect();
        let t: Vec<f64> = idx.iter().map(|&i| truth[i].clamp(0.0, 1.0)).collect();
        js_divergence_with(&p, &t, form, SMOOTHING).expect("validated inputs")
    };
    bootstrap(predicted.len(), js, BOOTSTRAP_RESAMPLES, rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskKind {
    Classify { boundary: f64 },
    Regress,
    Cascade { c1: f64, c2: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: TaskKind,
    pub predictor: String,
    pub metrics: BTreeMap<String, Estimate>,
    pub ci_method: String,
    pub train_rows: usize,
    pub test_rows: usize,
    /// Simulation calls behind the training rows.
    pub compute_calls: u64,
    pub total_calls: u64,
    pub call_ratio: f64,
    pub dataset: String,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl EvalReport {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).map(|e| e.value)
    }
}

pub const CI_METHOD: &str = "percentile bootstrap, 1000 resamples, 2.5/97.5";

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn f1_examples() {
        assert_eq!(f1_score(&[1, 0, 1], &[1, 0, 1]).unwrap(), 1.0);
        let mut p = vec![1u8; 10];
        p.extend([0, 0]);
        let mut t = vec![1u8; 8];
        t.extend([0, 0, 1, 1]);
        assert_abs_diff_eq!(f1_score(&p, &t).unwrap(), 0.8);
        assert_eq!(f1_score(&[0, 1], &[1, 0]).unwrap(), 0.0);
        assert_eq!(f1_score(&[0, 0], &[0, 0]).unwrap(), 0.0);
        assert!(f1_score(&[0], &[0, 1]).is_err());
        assert!(f1_score(&[], &[]).is_err());
    }

    #[test]
    fn kl_hand_value() {
        let v = kl_divergence(&[0.5, 0.5], &[0.9, 0.1]).unwrap();
        let hand = 0.5 * (0.5f64 / 0.9).ln() + 0.5 * (0.5f64 / 0.1).ln();
        assert_abs_diff_eq!(v, hand, epsilon = 1e-10);
        assert_abs_diff_eq!(v, 0.5108, epsilon = 1e-4);
        assert_eq!(kl_divergence(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_support_grows_with_inverse_eps() {
        let a = [1.0, 0.0];
        let b = [0.0, 1.0];
        let mut prev = 0.0;
        for eps in [1e-3, 1e-6, 1e-9, 1e-12] {
            let v = js_divergence_with(&a, &b, JsForm::Symmetrized, eps).unwrap();
            assert!(v.is_finite() && v > prev);
            prev = v;
        }
        let m = js_divergence_with(&a, &b, JsForm::Mixture, 1e-12).unwrap();
        assert!(m <= std::f64::consts::LN_2 + 1e-12);
    }

    #[test]
    fn distribution_smoothing() {
        assert_eq!(power_vector_to_distribution(&[0.5, 0.5]).unwrap(), vec![0.5, 0.5]);
        let u = power_vector_to_distribution(&[0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(u.iter().all(|x| *x == 0.25));
        let d = power_vector_to_distribution(&[0.2, 0.8]).unwrap();
        assert_abs_diff_eq!(d[0], 0.2, epsilon = 1e-12);
        assert!(power_vector_to_distribution(&[1.5]).is_err());
    }

    #[test]
    fn cascade_counts() {
        let power = [0.9, 0.7, 0.5, 0.95];
        let r = cascade_evaluate(&[1, 0, 0, 1], &[1, 1, 0, 1], &power, 0.8, 0.6).unwrap();
        assert_eq!(r.c1.f1, 1.0);
        assert_eq!(r.c2_rows, vec![1, 2]);
        assert_eq!(r.c2.f1, 1.0);
        let all_high = cascade_evaluate(&[1; 4], &[0; 4], &power, 0.8, 0.6).unwrap();
        assert!(all_high.c2.degenerate);
        assert_eq!(all_high.c2.rows, 0);
    }

    #[test]
    fn ci_contains_point_and_collapses_on_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (lo, hi) = confidence_interval_95(&[0.4; 20], &mut rng).unwrap();
        assert_eq!(lo, hi);
        assert!((lo - 0.4).abs() < 1e-15);
        let s: Vec<f64> = (0..30).map(|i| (i % 7) as f64).collect();
        let (lo, hi) = confidence_interval_95(&s, &mut rng).unwrap();
        let mean = s.iter().sum::<f64>() / 30.0;
        assert!(lo <= mean && mean <= hi && lo < hi);
        assert!(confidence_interval_95(&[1.0], &mut rng).is_err());
    }
}
