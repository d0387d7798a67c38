use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::{LossKind, Network};
use crate::error::{invalid, Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Task {
    Classify { boundary: f64 },
    Regress,
}

impl Task {
    pub fn default_loss(self) -> LossKind {
        match self {
            Task::Classify { .. } => LossKind::Bce,
            Task::Regress => LossKind::Mse,
        }
    }

    /// Training targets from true power values.
    pub fn targets(self, power: &[f64]) -> Vec<f64> {
        match self {
            Task::Classify { boundary } => power.iter().map(|p| f64::from(u8::from(*p > boundary))).collect(),
            Task::Regress => power.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopping {
    pub validation_fraction: f64,
    pub patience: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub loss: Option<LossKind>,
    pub task: Task,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Off unless set.
    pub early_stopping: Option<EarlyStopping>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            learning_rate: 1e-3,
            batch_size: 32,
            loss: None,
            task: Task::Classify { boundary: 0.8 },
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            early_stopping: None,
        }
    }
}

impl TrainConfig {
    pub fn loss_kind(&self) -> LossKind {
        self.loss.unwrap_or_else(|| self.task.default_loss())
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(invalid("epochs and batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.epsilon > 0.0) {
            return Err(invalid("Adam moments must lie in [0, 1) and epsilon must be positive"));
        }
        if let Task::Classify { boundary } = self.task {
            if !(0.0..1.0).contains(&boundary) {
                return Err(invalid("classification boundary must lie in [0, 1)"));
            }
        }
        if let Some(es) = self.early_stopping {
            if !(es.validation_fraction > 0.0 && es.validation_fraction < 1.0) || es.patience == 0 {
                return Err(invalid("early stopping needs 0 < validation_fraction < 1 and patience >= 1"));
            }
        }
        Ok(())
    }
}

/// Full-data loss at a given epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub history: Vec<LossPoint>,
    pub epochs_run: usize,
    pub final_loss: f64,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

/// Minibatch Adam on already-scaled inputs. Shuffles come from
/// `stream.child(epoch)`, so runs are reproducible per seed.
pub(crate) fn fit(network: &mut Network, xs: &[Vec<f64>], ys: &[f64], config: &TrainConfig, stream: &RngStream) -> Result<FitOutcome> {
    config.validate()?;
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(invalid("training needs a nonempty feature set with one target per row"));
    }
    let loss = config.loss_kind();
    match config.task {
        Task::Classify { .. } if ys.iter().any(|y| *y != 0.0 && *y != 1.0) => {
            return Err(invalid("classification targets must be 0 or 1"));
        }
        _ if ys.iter().any(|y| !(0.0..=1.0).contains(y)) => return Err(invalid("regression targets must lie in [0, 1]")),
        _ => {}
    }
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut validation: Vec<usize> = Vec::new();
    if let Some(es) = config.early_stopping {
        order.shuffle(&mut stream.child(u64::MAX).generator());
        let n_val = ((xs.len() as f64) * es.validation_fraction).round().max(1.0) as usize;
        if n_val >= xs.len() {
            return Err(invalid("validation split leaves no training rows"));
        }
        validation = order.split_off(xs.len() - n_val);
        order.sort_unstable();
    }
    let subset = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<f64>) { (idx.iter().map(|&i| xs[i].clone()).collect(), idx.iter().map(|&i| ys[i]).collect()) };
    let (train_x, train_y) = subset(&order);
    let (val_x, val_y) = subset(&validation);

    let mut adam = Adam { m: network.zero_grads(), v: network.zero_grads(), t: 0 };
    let mut grads = network.zero_grads();
    let mut step = network.zero_grads();
    let mut history = Vec::new();
    let mut best: Option<(f64, Network)> = None;
    let mut stale = 0;
    let mut epochs_run = 0;
    let mut idx: Vec<usize> = (0..train_x.len()).collect();
    for epoch in 1..=config.epochs {
        epochs_run = epoch;
        idx.shuffle(&mut stream.child(epoch as u64).generator());
        let mut epoch_loss = 0.0;
        for batch in idx.chunks(config.batch_size) {
            let l = network.batch_gradient(&train_x, &train_y, batch, loss, &mut grads);
            epoch_loss += l * batch.len() as f64;
            adam.t += 1;
            let bc1 = 1.0 - config.beta1.powi(adam.t);
            let bc2 = 1.0 - config.beta2.powi(adam.t);
            for (((g, m), v), s) in grads.iter().zip(adam.m.iter_mut()).zip(adam.v.iter_mut()).zip(step.iter_mut()) {
                *m = config.beta1 * *m + (1.0 - config.beta1) * g;
                *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
                *s = config.learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + config.epsilon);
            }
            network.apply_update(&step);
        }
        if !epoch_loss.is_finite() || !network.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        if epoch == 1 || epoch % 100 == 0 || epoch == config.epochs {
            history.push(LossPoint { epoch, loss: network.loss(&train_x, &train_y, loss) });
        }
        if let Some(es) = config.early_stopping {
            let v = network.loss(&val_x, &val_y, loss);
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, network.clone()));
                stale = 0;
            } else {
                stale += 1;
                if stale >= es.patience {
                    break;
                }
            }
        }
    }
    if let Some((_, net)) = best {
        *network = net;
    }
    let final_loss = network.loss(&train_x, &train_y, loss);
    if history.last().is_none_or(|p| p.epoch != epochs_run) {
        history.push(LossPoint { epoch: epochs_run, loss: final_loss });
    }
    Ok(FitOutcome { history, epochs_run, final_loss })
}
