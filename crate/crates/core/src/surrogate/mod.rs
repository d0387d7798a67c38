//! The power surrogate: a 64-32-1 perceptron trained with Adam, and
//! transfer initialization from a wider pretrained network.

mod network;
mod train;

pub use network::{grad_check, sigmoid, Activation, Layer, LossKind, Network};
pub use train::{EarlyStopping, FitOutcome, LossPoint, Task, TrainConfig};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::features::{FeatureSchema, PcaModel, Standardizer};
use crate::rng::RngStream;

/// Hidden widths of the surrogate.
pub const HIDDEN: [usize; 2] = [64, 32];
pub const DEFAULT_LR_GRID: [f64; 4] = [1e-2, 3e-3, 1e-3, 3e-4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Source {
    Fresh,
    Transfer { parent: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub epochs_run: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub loss: LossKind,
    pub task: Task,
    pub seed: u64,
    pub source: Source,
    pub train_rows: usize,
    pub history: Vec<LossPoint>,
}

/// A trained surrogate with everything needed to featurize new points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCheckpoint {
    pub layers: Vec<Layer>,
    /// Features the caller supplies.
    pub input_schema: FeatureSchema,
    /// Features the first layer was built for; wider after a transfer.
    pub network_schema: FeatureSchema,
    /// Input standardization over `network_schema` slots.
    pub scaling: Standardizer,
    /// PCA that produced the caller's PC block, when known.
    pub pca: Option<PcaModel>,
    pub training_meta: Option<TrainingMeta>,
}

/// Position of every child feature inside the parent layout.
pub fn slot_map(child: &FeatureSchema, parent: &FeatureSchema) -> Result<Vec<usize>> {
    if !child.fits_within(parent) {
        return Err(Error::IncompatibleTransfer(format!(
            "child blocks (beta {}, pc {}) exceed parent blocks (beta {}, pc {})",
            child.beta, child.pc, parent.beta, parent.pc
        )));
    }
    let mut map: Vec<usize> = (0..child.beta).collect();
    map.push(parent.n_index());
    map.push(parent.scaled_weight_index());
    map.extend((0..child.pc).map(|c| parent.pc_index(c)));
    Ok(map)
}

fn pnn_layers(width: usize, stream: &RngStream) -> Vec<Layer> {
    let mut rng = stream.generator();
    let mut layers = Vec::new();
    let mut fan_in = width;
    for h in HIDDEN {
        layers.push(Layer::init(fan_in, h, Activation::Relu, &mut rng));
        fan_in = h;
    }
    layers.push(Layer::init(fan_in, 1, Activation::Sigmoid, &mut rng));
    layers
}

impl NetworkCheckpoint {
    pub fn network(&self) -> Result<Network> {
        Network::new(self.layers.clone())
    }

    pub fn validate(&self) -> Result<()> {
        let net = self.network()?;
        if self.layers.last().map(|l| l.activation) != Some(Activation::Sigmoid) {
            return Err(invalid("output activation must be sigmoid"));
        }
        let width = self.network_schema.width();
        if net.input_width() != width || self.scaling.means.len() != width || self.scaling.scales.len() != width {
            return Err(Error::Schema { expected: width, got: net.input_width() });
        }
        slot_map(&self.input_schema, &self.network_schema)?;
        if let Some(pca) = &self.pca {
            if pca.n_components() != self.input_schema.pc {
                return Err(invalid("stored PCA does not match the input PC block"));
            }
        }
        Ok(())
    }

    /// Map caller features into scaled network inputs; unmapped slots are 0.
    pub fn network_inputs(&self, features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let map = slot_map(&self.input_schema, &self.network_schema)?;
        let width = self.network_schema.width();
        features
            .iter()
            .map(|row| {
                if row.len() != map.len() {
                    return Err(Error::Schema { expected: map.len(), got: row.len() });
                }
                let mut out = vec![0.0; width];
                for (x, &slot) in row.iter().zip(&map) {
                    out[slot] = (x - self.scaling.means[slot]) / self.scaling.scales[slot];
                }
                Ok(out)
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| invalid(format!("checkpoint serialization failed: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: NetworkCheckpoint = serde_json::from_str(text).map_err(|e| invalid(format!("bad checkpoint: {e}")))?;
        ckpt.validate()?;
        Ok(ckpt)
    }
}

/// Outputs in (0, 1): probabilities or power estimates.
pub fn predict(checkpoint: &NetworkCheckpoint, features: &[Vec<f64>]) -> Result<Vec<f64>> {
    let inputs = checkpoint.network_inputs(features)?;
    let net = checkpoint.network()?;
    Ok(Execution::default().map(inputs.len(), |i| net.forward(&inputs[i])))
}

/// Class labels thresholded at 0.5.
pub fn classify(checkpoint: &NetworkCheckpoint, features: &[Vec<f64>]) -> Result<Vec<u8>> {
    Ok(predict(checkpoint, features)?.into_iter().map(|p| u8::from(p > 0.5)).collect())
}

fn check_rows(schema: &FeatureSchema, features: &[Vec<f64>], targets: &[f64]) -> Result<()> {
    if features.is_empty() {
        return Err(invalid("no training rows"));
    }
    if features.len() != targets.len() {
        return Err(invalid("feature rows and targets differ in length"));
    }
    if let Some(row) = features.iter().find(|r| r.len() != schema.width()) {
        return Err(Error::Schema { expected: schema.width(), got: row.len() });
    }
    Ok(())
}

fn meta(config: &TrainConfig, seed: u64, source: Source, rows: usize, outcome: FitOutcome) -> TrainingMeta {
    TrainingMeta {
        epochs: config.epochs,
        epochs_run: outcome.epochs_run,
        learning_rate: config.learning_rate,
        batch_size: config.batch_size,
        loss: config.loss_kind(),
        task: config.task,
        seed,
        source,
        train_rows: rows,
        history: outcome.history,
    }
}

/// Train a fresh surrogate. `targets` are 0/1 labels for classification or
/// power values for regression (see [`Task::targets`]).
pub fn train_pnn(
    schema: FeatureSchema,
    features: &[Vec<f64>],
    targets: &[f64],
    config: &TrainConfig,
    seed: u64,
) -> Result<NetworkCheckpoint> {
    check_rows(&schema, features, targets)?;
    config.validate()?;
    let scaling = Standardizer::fit(features)?;
    let mut net = Network::new(pnn_layers(schema.width(), &RngStream::with_path(seed, &[0])))?;
    let scaled = scaling.transform(features);
    let outcome = train::fit(&mut net, &scaled, targets, config, &RngStream::with_path(seed, &[1]))?;
    Ok(NetworkCheckpoint {
        layers: net.layers,
        input_schema: schema,
        network_schema: schema,
        scaling,
        pca: None,
        training_meta: Some(meta(config, seed, Source::Fresh, features.len(), outcome)),
    })
}

/// Continue training an existing checkpoint (fresh Adam state).
pub fn fine_tune(
    checkpoint: &NetworkCheckpoint,
    features: &[Vec<f64>],
    targets: &[f64],
    config: &TrainConfig,
    seed: u64,
) -> Result<NetworkCheckpoint> {
    check_rows(&checkpoint.input_schema, features, targets)?;
    let inputs = checkpoint.network_inputs(features)?;
    let mut net = checkpoint.network()?;
    let outcome = train::fit(&mut net, &inputs, targets, config, &RngStream::with_path(seed, &[1]))?;
    let source = checkpoint.training_meta.as_ref().map_or(Source::Fresh, |m| m.source.clone());
    Ok(NetworkCheckpoint {
        layers: net.layers,
        training_meta: Some(meta(config, seed, source, features.len(), outcome)),
        ..checkpoint.clone()
    })
}

/// Reuse a wider parent for a child feature layout. Child features are
/// placed block-wise in the parent's slots; the rest are fed zeros.
pub fn transfer_init(parent: &NetworkCheckpoint, child_schema: FeatureSchema, parent_id: &str) -> Result<NetworkCheckpoint> {
    parent.validate()?;
    slot_map(&child_schema, &parent.network_schema)?;
    let mut meta = parent.training_meta.clone();
    if let Some(m) = meta.as_mut() {
        m.source = Source::Transfer { parent: parent_id.to_string() };
    }
    Ok(NetworkCheckpoint {
        layers: parent.layers.clone(),
        input_schema: child_schema,
        network_schema: parent.network_schema,
        scaling: parent.scaling.clone(),
        pca: None,
        training_meta: meta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub learning_rate: f64,
    pub validation_loss: f64,
}

/// Pick the learning rate with the lowest loss on a held-out fifth of the
/// rows, then retrain on every row with it.
pub fn sweep_learning_rate(
    schema: FeatureSchema,
    features: &[Vec<f64>],
    targets: &[f64],
    config: &TrainConfig,
    seed: u64,
    grid: &[f64],
) -> Result<(NetworkCheckpoint, Vec<SweepResult>)> {
    check_rows(&schema, features, targets)?;
    if grid.is_empty() {
        return Err(invalid("empty learning-rate grid"));
    }
    if features.len() < 5 {
        return Err(invalid("learning-rate sweep needs at least 5 rows"));
    }
    let mut order: Vec<usize> = (0..features.len()).collect();
    order.shuffle(&mut RngStream::with_path(seed, &[2]).generator());
    let n_val = features.len() / 5;
    let (val, fit_idx) = order.split_at(n_val);
    let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<f64>) {
        (idx.iter().map(|&i| features[i].clone()).collect(), idx.iter().map(|&i| targets[i]).collect())
    };
    let (fx, fy) = pick(fit_idx);
    let (vx, vy) = pick(val);
    let mut results = Vec::new();
    for &lr in grid {
        let cfg = TrainConfig { learning_rate: lr, ..config.clone() };
        let ckpt = train_pnn(schema, &fx, &fy, &cfg, seed)?;
        let net = ckpt.network()?;
        let loss = net.loss(&ckpt.network_inputs(&vx)?, &vy, cfg.loss_kind());
        results.push(SweepResult { learning_rate: lr, validation_loss: loss });
    }
    let best = results
        .iter()
        .filter(|r| r.validation_loss.is_finite())
        .min_by(|a, b| a.validation_loss.total_cmp(&b.validation_loss))
        .ok_or(Error::TrainingDiverged { epoch: 0 })?
        .learning_rate;
    let ckpt = train_pnn(schema, features, targets, &TrainConfig { learning_rate: best, ..config.clone() }, seed)?;
    Ok((ckpt, results))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_checkpoint(schema: FeatureSchema) -> NetworkCheckpoint {
        let w = schema.width();
        NetworkCheckpoint {
            layers: vec![
                Layer::zeros(w, 64, Activation::Relu),
                Layer::zeros(64, 32, Activation::Relu),
                Layer::zeros(32, 1, Activation::Sigmoid),
            ],
            input_schema: schema,
            network_schema: schema,
            scaling: Standardizer { means: vec![0.0; w], scales: vec![1.0; w] },
            pca: None,
            training_meta: None,
        }
    }

    #[test]
    fn zero_network_outputs_half() {
        let c = zero_checkpoint(FeatureSchema::new(2, 1));
        let out = predict(&c, &[vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![0.0; 5]]).unwrap();
        assert_eq!(out, vec![0.5, 0.5]);
        assert!(matches!(predict(&c, &[vec![1.0]]), Err(Error::Schema { .. })));
    }

    #[test]
    fn padding_arithmetic() {
        let parent = FeatureSchema::new(20, 21);
        let child = FeatureSchema::new(3, 17);
        let map = slot_map(&child, &parent).unwrap();
        assert_eq!(parent.width(), 43);
        assert_eq!(parent.width() - map.len(), 21);
        assert_eq!(map[3], 20);
        assert_eq!(map[4], 21);
        assert_eq!(map[5], 22);
        assert!(matches!(slot_map(&parent, &child), Err(Error::IncompatibleTransfer(_))));
    }

    #[test]
    fn json_round_trip_is_byte_stable() {
        let schema = FeatureSchema::new(1, 1);
        let xs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0, 10.0 + i as f64, 0.3 * i as f64, -(i as f64)]).collect();
        let ys: Vec<f64> = (0..8).map(|i| f64::from(u8::from(i > 3))).collect();
        let cfg = TrainConfig { epochs: 5, ..TrainConfig::default() };
        let c = train_pnn(schema, &xs, &ys, &cfg, 11).unwrap();
        let text = c.to_json().unwrap();
        let back = NetworkCheckpoint::from_json(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json().unwrap(), text);
    }
}
