use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation and the output.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Bce,
    Mse,
}

/// Dense layer; `weights[o][i]` connects input `i` to output `o`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Layer { weights: vec![vec![0.0; inputs]; outputs], biases: vec![0.0; outputs], activation }
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
    pub fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let mut draw = || rng.random_range(-bound..bound);
        let weights = (0..outputs).map(|_| (0..inputs).map(|_| draw()).collect()).collect();
        let biases = (0..outputs).map(|_| draw()).collect();
        Layer { weights, biases, activation }
    }

    pub fn inputs(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn outputs(&self) -> usize {
        self.biases.len()
    }

    fn n_params(&self) -> usize {
        self.outputs() * (self.inputs() + 1)
    }
}

/// Feed-forward stack with a single output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Layer>,
}

/// Parameter-shaped buffer (weights then biases, layer by layer).
pub(crate) type Grads = Vec<f64>;

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let last = layers.last().ok_or_else(|| invalid("network needs at least one layer"))?;
        if last.outputs() != 1 {
            return Err(invalid("the output layer must have exactly one unit"));
        }
        for (l, layer) in layers.iter().enumerate() {
            if layer.weights.iter().any(|r| r.len() != layer.inputs()) || layer.inputs() == 0 {
                return Err(invalid(format!("layer {l} has ragged or empty weights")));
            }
            if l > 0 && layer.inputs() != layers[l - 1].outputs() {
                return Err(invalid(format!("layer {l} expects {} inputs, previous emits {}", layer.inputs(), layers[l - 1].outputs())));
            }
        }
        Ok(Network { layers })
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Layer::n_params).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.biases.iter().chain(l.weights.iter().flatten()).all(|v| v.is_finite()))
    }

    /// Pre-activations and activations of every layer.
    fn trace(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut zs = Vec::with_capacity(self.layers.len());
        let mut acts = vec![x.to_vec()];
        for layer in &self.layers {
            let input = acts.last().expect("input present");
            let z: Vec<f64> = layer
                .weights
                .iter()
                .zip(&layer.biases)
                .map(|(w, b)| w.iter().zip(input).fold(*b, |s, (wi, xi)| s + wi * xi))
                .collect();
            acts.push(z.iter().map(|v| layer.activation.apply(*v)).collect());
            zs.push(z);
        }
        (zs, acts)
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        let (_, acts) = self.trace(x);
        acts.last().expect("output")[0]
    }

    fn output_layer(&self) -> &Layer {
        self.layers.last().expect("nonempty")
    }

    fn sample_loss(&self, z: f64, a: f64, y: f64, loss: LossKind) -> f64 {
        match loss {
            // from the logit, which stays finite for saturated outputs
            LossKind::Bce if self.output_layer().activation == Activation::Sigmoid => {
                z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
            }
            LossKind::Bce => {
                let p = a.clamp(1e-15, 1.0 - 1e-15);
                -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
            }
            LossKind::Mse => (a - y).powi(2),
        }
    }

    /// Mean loss over a batch.
    pub fn loss(&self, xs: &[Vec<f64>], ys: &[f64], loss: LossKind) -> f64 {
        let total: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| {
                let (zs, acts) = self.trace(x);
                self.sample_loss(zs.last().expect("z")[0], acts.last().expect("a")[0], *y, loss)
            })
            .sum();
        total / xs.len() as f64
    }

    pub(crate) fn zero_grads(&self) -> Grads {
        vec![0.0; self.n_params()]
    }

    /// Accumulate the mean-loss gradient of the batch `idx` into `grads`
    /// (cleared first) and return the batch loss.
    pub(crate) fn batch_gradient(&self, xs: &[Vec<f64>], ys: &[f64], idx: &[usize], loss: LossKind, grads: &mut Grads) -> f64 {
        grads.iter_mut().for_each(|g| *g = 0.0);
        let offsets = self.offsets();
        let scale = 1.0 / idx.len() as f64;
        let mut total = 0.0;
        for &s in idx {
            let (zs, acts) = self.trace(&xs[s]);
            let (z_out, a_out) = (zs.last().expect("z")[0], acts.last().expect("a")[0]);
            total += self.sample_loss(z_out, a_out, ys[s], loss);
            let out_act = self.output_layer().activation;
            let mut delta = vec![match (loss, out_act) {
                (LossKind::Bce, Activation::Sigmoid) => a_out - ys[s],
                (LossKind::Bce, _) => {
                    let p = a_out.clamp(1e-15, 1.0 - 1e-15);
                    ((p - ys[s]) / (p * (1.0 - p))) * out_act.derivative(z_out, a_out)
                }
                (LossKind::Mse, _) => 2.0 * (a_out - ys[s]) * out_act.derivative(z_out, a_out),
            }];
            for l in (0..self.layers.len()).rev() {
                let layer = &self.layers[l];
                let input = &acts[l];
                let (w_off, b_off) = offsets[l];
                for (o, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    let row = &mut grads[w_off + o * layer.inputs()..w_off + (o + 1) * layer.inputs()];
                    for (g, xi) in row.iter_mut().zip(input) {
                        *g += scale * d * xi;
                    }
                    grads[b_off + o] += scale * d;
                }
                if l > 0 {
                    let prev = &self.layers[l - 1];
                    delta = (0..layer.inputs())
                        .map(|i| {
                            let back: f64 = delta.iter().zip(&layer.weights).map(|(d, w)| d * w[i]).sum();
                            back * prev.activation.derivative(zs[l - 1][i], acts[l][i])
                        })
                        .collect();
                }
            }
        }
        total * scale
    }

    /// (weight offset, bias offset) of each layer in the flat buffer.
    fn offsets(&self) -> Vec<(usize, usize)> {
        let mut at = 0;
        self.layers
            .iter()
            .map(|l| {
                let w = at;
                at += l.inputs() * l.outputs();
                let b = at;
                at += l.outputs();
                (w, b)
            })
            .collect()
    }

    pub(crate) fn param_mut(&mut self, flat: usize) -> &mut f64 {
        let mut rest = flat;
        for layer in &mut self.layers {
            let (cols, n_w) = (layer.inputs(), layer.inputs() * layer.outputs());
            if rest < n_w {
                return &mut layer.weights[rest / cols][rest % cols];
            }
            rest -= n_w;
            if rest < layer.outputs() {
                return &mut layer.biases[rest];
            }
            rest -= layer.outputs();
        }
        panic!("parameter index {flat} out of range")
    }

    pub(crate) fn apply_update(&mut self, step: &[f64]) {
        let mut it = step.iter();
        for layer in &mut self.layers {
            for row in &mut layer.weights {
                for w in row.iter_mut() {
                    *w -= it.next().expect("step sized to params");
                }
            }
            for b in &mut layer.biases {
                *b -= it.next().expect("step sized to params");
            }
        }
    }

    /// Analytic gradient of the mean batch loss, flattened.
    pub fn gradient(&self, xs: &[Vec<f64>], ys: &[f64], loss: LossKind) -> Vec<f64> {
        let idx: Vec<usize> = (0..xs.len()).collect();
        let mut g = self.zero_grads();
        self.batch_gradient(xs, ys, &idx, loss, &mut g);
        g
    }
}

/// Largest relative disagreement between backprop and central differences
/// (step 1e-5) over every parameter. The denominator is floored at 1e-6 so
/// that vanishing gradients compare on an absolute scale.
pub fn grad_check(network: &Network, xs: &[Vec<f64>], ys: &[f64], loss: LossKind) -> Result<f64> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(invalid("gradient check needs a nonempty batch with matching targets"));
    }
    if xs.iter().any(|x| x.len() != network.input_width()) {
        return Err(invalid("batch width differs from the network input"));
    }
    let analytic = network.gradient(xs, ys, loss);
    let h = 1e-5;
    let mut probe = network.clone();
    let mut worst: f64 = 0.0;
    for (p, a) in analytic.iter().enumerate() {
        let orig = *probe.param_mut(p);
        *probe.param_mut(p) = orig + h;
        let up = probe.loss(xs, ys, loss);
        *probe.param_mut(p) = orig - h;
        let down = probe.loss(xs, ys, loss);
        *probe.param_mut(p) = orig;
        let numeric = (up - down) / (2.0 * h);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hand_built_forward() {
        // 1 -> 2 (relu) -> 1 (sigmoid)
        let net = Network::new(vec![
            Layer { weights: vec![vec![2.0], vec![-1.0]], biases: vec![0.5, 0.25], activation: Activation::Relu },
            Layer { weights: vec![vec![0.75, -1.5]], biases: vec![-0.1], activation: Activation::Sigmoid },
        ])
        .unwrap();
        let x = 0.3;
        let h1 = (2.0 * x + 0.5f64).max(0.0);
        let h2 = (-x + 0.25f64).max(0.0);
        let z = 0.75 * h1 - 1.5 * h2 - 0.1;
        let expect = 1.0 / (1.0 + (-z).exp());
        assert!((net.forward(&[x]) - expect).abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        assert!(Network::new(vec![]).is_err());
        assert!(Network::new(vec![Layer::zeros(3, 2, Activation::Relu)]).is_err());
        assert!(Network::new(vec![Layer::zeros(3, 2, Activation::Relu), Layer::zeros(3, 1, Activation::Sigmoid)]).is_err());
    }

    #[test]
    fn linear_mse_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let layer = Layer::init(3, 1, Activation::Identity, &mut rng);
        let net = Network::new(vec![layer.clone()]).unwrap();
        let xs: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64 * 0.1, 1.0 - i as f64 * 0.2, (i % 3) as f64]).collect();
        let ys: Vec<f64> = (0..7).map(|i| (i as f64).sin()).collect();
        let g = net.gradient(&xs, &ys, LossKind::Mse);
        let n = xs.len() as f64;
        let resid: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| net.forward(x) - y).collect();
        for j in 0..3 {
            let expect: f64 = 2.0 * xs.iter().zip(&resid).map(|(x, r)| x[j] * r).sum::<f64>() / n;
            assert!((g[j] - expect).abs() < 1e-12);
        }
        assert!((g[3] - 2.0 * resid.iter().sum::<f64>() / n).abs() < 1e-12);
    }

    #[test]
    fn zero_input_bias_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net = Network::new(vec![
            Layer::init(4, 6, Activation::Sigmoid, &mut rng),
            Layer::init(6, 1, Activation::Sigmoid, &mut rng),
        ])
        .unwrap();
        let xs = vec![vec![0.0; 4]; 3];
        let ys = vec![1.0, 0.0, 1.0];
        let g = net.gradient(&xs, &ys, LossKind::Bce);
        // first-layer weight gradients vanish with zero inputs
        assert!(g[..24].iter().all(|v| *v == 0.0));
        let h = 1e-5;
        for p in 24..g.len() {
            let mut probe = net.clone();
            let orig = *probe.param_mut(p);
            *probe.param_mut(p) = orig + h;
            let up = probe.loss(&xs, &ys, LossKind::Bce);
            *probe.param_mut(p) = orig - h;
            let down = probe.loss(&xs, &ys, LossKind::Bce);
            assert!((g[p] - (up - down) / (2.0 * h)).abs() < 1e-6);
        }
    }
}
