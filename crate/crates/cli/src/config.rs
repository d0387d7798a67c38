//! The JSON experiment configuration shared by every subcommand.

use std::path::{Path, PathBuf};

use powermap::baselines::{ClusterAxes, PropagationConfig};
use powermap::exec::Execution;
use powermap::features::DEFAULT_VARIANCE_TARGET;
use powermap::metrics::JsForm;
use powermap::models::{ColumnSpec, DesignSpec, ErrorDist, Hypothesis, ModelFamily, TestKind};
use powermap::power::SimulationSpec;
use powermap::sampler::SamplerConfig;
use powermap::surrogate::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config_err, CliError, CliResult};

pub const ENV_SEED: &str = "POWERMAP_SEED";
pub const ENV_OUTPUT_DIR: &str = "POWERMAP_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub simulation: Option<SimulationConfig>,
    #[serde(default)]
    pub sampler: Option<SamplerSection>,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub split: SplitSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub baseline: BaselineSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub plot: PlotSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilyName {
    #[serde(rename = "REG")]
    Reg,
    #[serde(rename = "LOGIT")]
    Logit,
    #[serde(rename = "RMANOVA")]
    RmAnova,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DesignChoice {
    /// "D_O" or "D_A".
    Named(String),
    Custom { columns: Vec<ColumnSpec> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HypothesisChoice {
    /// "H_O" or "H'_O".
    Named(String),
    Explicit { tested_indices: Vec<usize>, test: Option<TestKind> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub family: FamilyName,
    /// Factor levels for RMANOVA.
    #[serde(default)]
    pub levels: Option<[usize; 2]>,
    pub k: usize,
    #[serde(default = "default_design")]
    pub design: DesignChoice,
    #[serde(default = "default_hypothesis")]
    pub hypothesis: HypothesisChoice,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_sims")]
    pub sims: usize,
    #[serde(default)]
    pub error: ErrorDist,
}

fn default_design() -> DesignChoice {
    DesignChoice::Named("D_O".into())
}
fn default_hypothesis() -> HypothesisChoice {
    HypothesisChoice::Named("H_O".into())
}
fn default_alpha() -> f64 {
    0.05
}
fn default_sims() -> usize {
    1000
}

impl SimulationConfig {
    pub fn family(&self) -> ModelFamily {
        match self.family {
            FamilyName::Reg => ModelFamily::Reg,
            FamilyName::Logit => ModelFamily::Logit,
            FamilyName::RmAnova => {
                let [levels_a, levels_b] = self.levels.unwrap_or([2, 2]);
                ModelFamily::RmAnova { levels_a, levels_b }
            }
        }
    }

    pub fn to_spec(&self) -> CliResult<SimulationSpec> {
        let family = self.family();
        let design = match &self.design {
            DesignChoice::Named(n) if n == "D_O" => DesignSpec::original(self.k),
            DesignChoice::Named(n) if n == "D_A" => DesignSpec::alternate(self.k),
            DesignChoice::Named(n) => return Err(config_err(format!("unknown design {n:?}; use D_O, D_A or {{\"columns\": [...]}}"))),
            DesignChoice::Custom { columns } => {
                if columns.len() != self.k {
                    return Err(config_err(format!("custom design has {} columns but k = {}", columns.len(), self.k)));
                }
                DesignSpec::custom(columns.clone())
            }
        }
        .map_err(config_err)?;
        let hypothesis = match &self.hypothesis {
            HypothesisChoice::Named(n) if n == "H_O" => Hypothesis::primary(&family),
            HypothesisChoice::Named(n) if n == "H'_O" => Hypothesis::secondary(&family),
            HypothesisChoice::Named(n) => return Err(config_err(format!("unknown hypothesis {n:?}; use H_O, H'_O or explicit indices"))),
            HypothesisChoice::Explicit { tested_indices, test } => {
                Hypothesis::new(tested_indices.clone(), test.unwrap_or_else(|| family.default_test()))
            }
        };
        let spec = SimulationSpec { family, design, hypothesis, alpha: self.alpha, sims: self.sims, error: self.error };
        spec.validate().map_err(config_err)?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaDomain {
    Shared([f64; 2]),
    PerCoefficient(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub total: usize,
    #[serde(default = "default_local")]
    pub local: usize,
    #[serde(default = "default_sigma_local")]
    pub sigma_local: f64,
    #[serde(default = "default_sigma_n")]
    pub sigma_n: f64,
    #[serde(default = "default_beta_domain")]
    pub beta_domain: BetaDomain,
    #[serde(default = "default_n_domain")]
    pub n_domain: [f64; 2],
}

fn default_local() -> usize {
    4
}
fn default_sigma_local() -> f64 {
    0.02
}
fn default_sigma_n() -> f64 {
    5.0
}
fn default_beta_domain() -> BetaDomain {
    BetaDomain::Shared([0.1, 0.3])
}
fn default_n_domain() -> [f64; 2] {
    [10.0, 200.0]
}

impl SamplerSection {
    pub fn to_config(&self, k: usize) -> CliResult<SamplerConfig> {
        let beta_domain = match &self.beta_domain {
            BetaDomain::Shared(b) => vec![*b; k],
            BetaDomain::PerCoefficient(v) if v.len() == k => v.clone(),
            BetaDomain::PerCoefficient(v) => {
                return Err(config_err(format!("beta_domain lists {} ranges for k = {k}", v.len())));
            }
        };
        let cfg = SamplerConfig {
            total: self.total,
            local: self.local,
            sigma_local: self.sigma_local,
            sigma_n: Some(self.sigma_n),
            beta_domain,
            n_domain: self.n_domain,
        };
        cfg.validate().map_err(config_err)?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(default)]
pub struct SimulateSection {
    /// Points simulated between checkpoints of the partial file.
    pub chunk: usize,
    pub execution: Execution,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection { chunk: 100, execution: Execution::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSection {
    pub train_fraction: f64,
    /// Defaults to the top-level seed.
    pub seed: Option<u64>,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection { train_fraction: 0.1, seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSection {
    #[serde(flatten)]
    pub config: TrainConfig,
    #[serde(default)]
    pub lr_sweep: bool,
    #[serde(default = "default_variance_target")]
    pub variance_target: f64,
}

fn default_variance_target() -> f64 {
    DEFAULT_VARIANCE_TARGET
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection { config: TrainConfig::default(), lr_sweep: false, variance_target: DEFAULT_VARIANCE_TARGET }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    Rand,
    Cluster,
    Knn,
    Lprop,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSection {
    pub method: BaselineMethod,
    pub boundary: f64,
    pub n_neighbors: usize,
    pub k_clusters: usize,
    pub cluster_axes: ClusterAxes,
    pub gamma: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for BaselineSection {
    fn default() -> Self {
        let p = PropagationConfig::default();
        BaselineSection {
            method: BaselineMethod::All,
            boundary: 0.8,
            n_neighbors: 5,
            k_clusters: 2,
            cluster_axes: ClusterAxes::default(),
            gamma: p.gamma,
            max_iter: p.max_iter,
            tol: p.tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub js_form: JsForm,
    /// Boundaries used for cascade checkpoints that carry no task.
    pub c1_boundary: f64,
    pub c2_boundary: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { js_form: JsForm::default(), c1_boundary: 0.8, c2_boundary: 0.6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    Manifold,
    Cluster,
    Trend,
    Cost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlotSection {
    pub kind: PlotKind,
    /// Report metric drawn by the trend and cost plots.
    pub metric: String,
}

impl Default for PlotSection {
    fn default() -> Self {
        PlotSection { kind: PlotKind::Manifold, metric: "f1".into() }
    }
}

fn check_fraction(name: &str, f: f64) -> CliResult<()> {
    if !(f > 0.0 && f < 1.0) {
        return Err(config_err(format!("{name} must lie strictly between 0 and 1, got {f}")));
    }
    Ok(())
}

impl Config {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| config_err(format!("cannot parse config: {e}")))
    }

    /// Read, apply environment overrides, validate.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.apply_env(std::env::var(ENV_SEED).ok(), std::env::var(ENV_OUTPUT_DIR).ok())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, seed: Option<String>, output_dir: Option<String>) -> CliResult<()> {
        if let Some(s) = seed {
            self.seed = s.trim().parse().map_err(|_| config_err(format!("{ENV_SEED}={s:?} is not an unsigned integer")))?;
        }
        if let Some(d) = output_dir {
            self.output_dir = PathBuf::from(d);
        }
        Ok(())
    }

    pub fn validate(&self) -> CliResult<()> {
        if let Some(sim) = &self.simulation {
            let spec = sim.to_spec()?;
            if let Some(s) = &self.sampler {
                let cfg = s.to_config(sim.k)?;
                let min_n = spec.family.min_sample_size(sim.k) as f64;
                if cfg.n_domain[0].ceil() < min_n {
                    return Err(config_err(format!("n_domain starts below the minimum sample size {min_n} for k = {}", sim.k)));
                }
            }
        }
        if self.simulate.chunk == 0 {
            return Err(config_err("simulate.chunk must be positive"));
        }
        check_fraction("split.train_fraction", self.split.train_fraction)?;
        self.train.config.validate().map_err(config_err)?;
        if !(self.train.variance_target > 0.0 && self.train.variance_target <= 1.0) {
            return Err(config_err("train.variance_target must lie in (0, 1]"));
        }
        let b = &self.baseline;
        check_fraction("baseline.boundary", b.boundary)?;
        if b.n_neighbors == 0 || b.k_clusters == 0 || b.max_iter == 0 || !(b.gamma > 0.0) || !(b.tol > 0.0) {
            return Err(config_err("baseline parameters must be positive"));
        }
        check_fraction("eval.c1_boundary", self.eval.c1_boundary)?;
        check_fraction("eval.c2_boundary", self.eval.c2_boundary)?;
        if self.plot.metric.is_empty() {
            return Err(config_err("plot.metric must name a report metric"));
        }
        Ok(())
    }

    pub fn simulation_spec(&self) -> CliResult<SimulationSpec> {
        self.simulation.as_ref().ok_or_else(|| config_err("this command needs a \"simulation\" section"))?.to_spec()
    }

    pub fn sampler_config(&self) -> CliResult<SamplerConfig> {
        let k = self.simulation.as_ref().ok_or_else(|| config_err("this command needs a \"simulation\" section"))?.k;
        self.sampler.as_ref().ok_or_else(|| config_err("this command needs a \"sampler\" section"))?.to_config(k)
    }

    pub fn split_seed(&self) -> u64 {
        self.split.seed.unwrap_or(self.seed)
    }

    /// SHA-256 of the canonical (post-override) configuration. The output
    /// directory is left out so relocated runs hash alike.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let text = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn output_path(&self, explicit: Option<&Path>, default_name: &str) -> PathBuf {
        explicit.map_or_else(|| self.output_dir.join(default_name), Path::to_path_buf)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"{"seed": 3, "simulation": {"family": "REG", "k": 3, "sims": 50}, "sampler": {"total": 20}}"#
    }

    #[test]
    fn defaults_fill_in() {
        let c = Config::from_json(minimal()).unwrap();
        c.validate().unwrap();
        let spec = c.simulation_spec().unwrap();
        assert_eq!(spec.hypothesis.tested_indices, vec![1, 3]);
        assert_eq!(c.train.config.epochs, 500);
        assert_eq!(c.split.train_fraction, 0.1);
        assert_eq!(c.sampler_config().unwrap().beta_domain.len(), 3);
    }

    #[test]
    fn env_overrides() {
        let mut c = Config::from_json(minimal()).unwrap();
        let h = c.hash();
        c.apply_env(None, Some("/tmp/x".into())).unwrap();
        assert_eq!(c.output_dir, PathBuf::from("/tmp/x"));
        assert_eq!(c.hash(), h);
        c.apply_env(Some("42".into()), None).unwrap();
        assert_eq!(c.seed, 42);
        assert_ne!(c.hash(), h);
        assert!(c.apply_env(Some("nope".into()), None).is_err());
    }

    #[test]
    fn rejects_bad_sections() {
        for bad in [
            r#"{"seed": 1, "bogus": 2}"#,
            r#"{"seed": 1, "simulation": {"family": "REG", "k": 2}}"#,
            r#"{"seed": 1, "simulation": {"family": "REG", "k": 3, "design": "D_X"}}"#,
            r#"{"seed": 1, "split": {"train_fraction": 1.5}}"#,
            r#"{"seed": 1, "train": {"epochs": 0}}"#,
            r#"{"seed": 1, "simulation": {"family": "REG", "k": 20}, "sampler": {"total": 5}}"#,
        ] {
            let r = Config::from_json(bad).and_then(|c| c.validate());
            assert!(matches!(r, Err(CliError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn train_section_flattens() {
        let c = Config::from_json(r#"{"seed": 1, "train": {"epochs": 7, "task": {"kind": "regress"}, "lr_sweep": true}}"#).unwrap();
        assert_eq!(c.train.config.epochs, 7);
        assert!(c.train.lr_sweep);
        assert_eq!(c.train.config.task, powermap::surrogate::Task::Regress);
    }
}
