//! Monte Carlo power with global call accounting.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::models::{
    fit_logistic_irls, fit_ols, generate_design, generate_response, partial_f_test, rmanova_f_test, t_test,
    wald_test, DesignSpec, Effect, ErrorDist, Hypothesis, ModelFamily, Response, TestKind,
};
use crate::rng::RngStream;

static GLOBAL_CALLS: AtomicU64 = AtomicU64::new(0);

/// Total `compute_power` invocations in this process since the last reset.
pub fn call_count() -> u64 {
    GLOBAL_CALLS.load(Ordering::SeqCst)
}

pub fn reset_call_count() {
    GLOBAL_CALLS.store(0, Ordering::SeqCst);
}

/// A shareable counter of power computations.
#[derive(Debug, Clone, Default)]
pub struct CallCounter(Arc<AtomicU64>);

impl CallCounter {
    pub fn get(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.0.store(0, Ordering::SeqCst);
    }

    fn bump(&self) {
        self.0.fetch_add(1, Ordering::SeqCst);
        GLOBAL_CALLS.fetch_add(1, Ordering::SeqCst);
    }
}

/// One candidate model configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterPoint {
    pub beta: Vec<f64>,
    pub n: usize,
}

impl ParameterPoint {
    pub fn new(beta: Vec<f64>, n: usize) -> Self {
        Self { beta, n }
    }
}

/// A parameter point with its simulated power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRecord {
    pub point: ParameterPoint,
    pub power: f64,
    pub rejections: usize,
    pub sims: usize,
    pub alpha: f64,
    pub seed: u64,
    pub index: u64,
    /// Trials that hit a singular or non-converging fit.
    pub degenerate: usize,
}

/// Everything that defines the simulated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub family: ModelFamily,
    pub design: DesignSpec,
    pub hypothesis: Hypothesis,
    pub alpha: f64,
    pub sims: usize,
    #[serde(default)]
    pub error: ErrorDist,
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        self.hypothesis.validate(&self.family, &self.design)?;
        self.error.validate()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Specification(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.sims == 0 {
            return Err(Error::Specification("sims must be >= 1".into()));
        }
        Ok(())
    }

    fn rmanova_effects(&self) -> Vec<Effect> {
        let mut effects = Vec::new();
        for &i in &self.hypothesis.tested_indices {
            let effect = match self.design.factor_dependence(i - 1) {
                (true, false) => Effect::A,
                (false, true) => Effect::B,
                (true, true) => Effect::AB,
                (false, false) => continue,
            };
            if !effects.contains(&effect) {
                effects.push(effect);
            }
        }
        effects.sort();
        effects
    }
}

/// Outcome of one simulated study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Trial {
    Reject,
    Accept,
    Degenerate,
}

/// Redraws allowed when a logistic fit fails to converge.
const LOGIT_REDRAWS: usize = 5;

/// Runs power simulations for one experiment definition.
#[derive(Debug, Clone)]
pub struct PowerEngine {
    spec: SimulationSpec,
    seed: u64,
    execution: Execution,
    counter: CallCounter,
    effects: Vec<Effect>,
}

impl PowerEngine {
    pub fn new(spec: SimulationSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let effects = spec.rmanova_effects();
        Ok(Self { spec, seed, execution: Execution::default(), counter: CallCounter::default(), effects })
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn spec(&self) -> &SimulationSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Calls made through this engine.
    pub fn calls(&self) -> u64 {
        self.counter.get()
    }

    pub fn counter(&self) -> &CallCounter {
        &self.counter
    }

    fn check_point(&self, point: &ParameterPoint) -> Result<()> {
        let k = self.spec.design.k();
        if point.beta.len() != k {
            return Err(invalid(format!("beta has {} entries, design has {k} predictors", point.beta.len())));
        }
        if point.beta.iter().any(|b| !b.is_finite()) {
            return Err(invalid("beta must be finite"));
        }
        let min_n = self.spec.family.min_sample_size(k);
        if point.n < min_n {
            return Err(invalid(format!("sample size {} below minimum {min_n} for {k} predictors", point.n)));
        }
        Ok(())
    }

    fn trial(&self, point: &ParameterPoint, stream: &RngStream) -> Result<Trial> {
        let spec = &self.spec;
        let mut rng = stream.generator();
        let tested = &spec.hypothesis.tested_indices;
        let attempts = if spec.family == ModelFamily::Logit { 1 + LOGIT_REDRAWS } else { 1 };
        for _ in 0..attempts {
            let x = generate_design(&spec.design, point.n, &mut rng)?;
            let response = generate_response(&spec.family, &spec.design, &x, &point.beta, &spec.error, &mut rng)?;
            let p = match response {
                Response::Continuous(y) => {
                    let full = match fit_ols(&x, &y) {
                        Ok(f) => f,
                        Err(Error::SingularFit(_)) => return Ok(Trial::Degenerate),
                        Err(e) => return Err(e),
                    };
                    match spec.hypothesis.test {
                        TestKind::T => t_test(&full, tested[0])?.p_value,
                        _ => {
                            let reduced_x = crate::models::drop_columns(&x, tested);
                            let reduced = match fit_ols(&reduced_x, &y) {
                                Ok(f) => f,
                                Err(Error::SingularFit(_)) => return Ok(Trial::Degenerate),
                                Err(e) => return Err(e),
                            };
                            partial_f_test(&full, &reduced)?.p_value
                        }
                    }
                }
                Response::Binary(y) => {
                    let fit = fit_logistic_irls(&x, &y)?;
                    if !fit.converged {
                        continue;
                    }
                    match wald_test(&fit.coefficients, &fit.covariance, tested) {
                        Ok(p) => p,
                        Err(Error::DegenerateTest(_)) => continue,
                        Err(e) => return Err(e),
                    }
                }
                Response::Repeated(y) => {
                    let ModelFamily::RmAnova { levels_a, levels_b } = spec.family else {
                        unreachable!("repeated responses come from RMANOVA")
                    };
                    rmanova_f_test(&y, levels_a, levels_b)?.combined_p(&self.effects)?
                }
            };
            return Ok(if p <= spec.alpha { Trial::Reject } else { Trial::Accept });
        }
        Ok(Trial::Degenerate)
    }

    /// Estimate power at `point` with `sims` replicates.
    ///
    /// Replicate `s` draws from stream `(seed, [point_index, s])`, so the
    /// estimate is identical under sequential and parallel execution.
    /// Increments the call counter by exactly one.
    pub fn compute_power(&self, point: &ParameterPoint, point_index: u64) -> Result<PowerRecord> {
        self.check_point(point)?;
        let root = RngStream::with_path(self.seed, &[point_index]);
        let outcomes = self.execution.map(self.spec.sims, |s| self.trial(point, &root.child(s as u64)));
        self.counter.bump();
        let mut rejections = 0;
        let mut degenerate = 0;
        for o in outcomes {
            match o? {
                Trial::Reject => rejections += 1,
                Trial::Accept => {}
                Trial::Degenerate => degenerate += 1,
            }
        }
        Ok(PowerRecord {
            point: point.clone(),
            power: rejections as f64 / self.spec.sims as f64,
            rejections,
            sims: self.spec.sims,
            alpha: self.spec.alpha,
            seed: self.seed,
            index: point_index,
            degenerate,
        })
    }

    /// Power for every point, in order; point `i` uses stream index `offset + i`.
    pub fn generate_training_data_from(&self, points: &[ParameterPoint], offset: u64) -> Result<Vec<PowerRecord>> {
        for p in points {
            self.check_point(p)?;
        }
        self.execution
            .map(points.len(), |i| self.compute_power(&points[i], offset + i as u64))
            .into_iter()
            .collect()
    }

    /// Power for every point, in order.
    pub fn generate_training_data(&self, points: &[ParameterPoint]) -> Result<Vec<PowerRecord>> {
        self.generate_training_data_from(points, 0)
    }
}
