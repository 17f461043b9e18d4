//! Small deterministic feedforward networks trained with plain
//! mini-batch SGD.
//!
//! Weights are stored row-major (`outputs × inputs`). The output head is
//! tied to the loss: binary cross-entropy needs a single sigmoid unit and
//! categorical cross-entropy a softmax layer, so in both cases the output
//! error is simply `prediction - target`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Probabilities are clamped here before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// Step used by [`gradient_check`].
pub const FD_STEP: f64 = 1e-5;

/// Gradients smaller than this are compared absolutely in [`gradient_check`].
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Sigmoid,
    Softmax,
    Identity,
}

impl Activation {
    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Softmax => "softmax",
            Activation::Identity => "identity",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "softmax" => Ok(Activation::Softmax),
            "identity" => Ok(Activation::Identity),
            other => Err(alloc::format!("unknown activation `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Loss {
    /// Binary cross-entropy over a single sigmoid output.
    Bce,
    /// Categorical cross-entropy over a softmax output.
    Cce,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("input contains a non-finite value")]
    NonFiniteInput,
    #[error("parameters contain a non-finite value")]
    NonFiniteParams,
    #[error("softmax is only allowed as the final activation")]
    SoftmaxNotFinal,
    #[error("network has no layers")]
    NoLayers,
    #[error("loss {loss:?} requires {required}")]
    IncompatibleLoss { loss: Loss, required: &'static str },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid training config: {0}")]
    InvalidConfig(&'static str),
}

/// One dense layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl Layer {
    pub fn new(
        inputs: usize,
        outputs: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self, NnError> {
        if weights.len() != inputs * outputs {
            return Err(NnError::DimensionMismatch {
                expected: inputs * outputs,
                found: weights.len(),
            });
        }
        if bias.len() != outputs {
            return Err(NnError::DimensionMismatch {
                expected: outputs,
                found: bias.len(),
            });
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(NnError::NonFiniteParams);
        }
        Ok(Self {
            inputs,
            outputs,
            weights,
            bias,
            activation,
        })
    }

    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            inputs,
            outputs,
            weights: alloc::vec![0.0; inputs * outputs],
            bias: alloc::vec![0.0; outputs],
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (row, b) in self.weights.chunks_exact(self.inputs).zip(&self.bias) {
            let dot: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            out.push(dot + b);
        }
    }
}

/// Weights and biases of a feedforward classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    layers: Vec<Layer>,
}

impl ModelParams {
    pub fn new(layers: Vec<Layer>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::NoLayers);
        }
        for pair in layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(NnError::DimensionMismatch {
                    expected: pair[0].outputs,
                    found: pair[1].inputs,
                });
            }
        }
        if layers[..layers.len() - 1]
            .iter()
            .any(|l| l.activation == Activation::Softmax)
        {
            return Err(NnError::SoftmaxNotFinal);
        }
        Ok(Self { layers })
    }

    /// Builds a network with the given layer widths, hidden activation and
    /// output head. Weights are drawn uniformly from `±1/sqrt(fan_in)`,
    /// biases start at zero.
    pub fn init(
        input_dim: usize,
        hidden: &[usize],
        hidden_activation: Activation,
        output_dim: usize,
        head: Activation,
        seed: u64,
    ) -> Result<Self, NnError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(input_dim);
        dims.extend_from_slice(hidden);
        dims.push(output_dim);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (i, pair) in dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / libm::sqrt(fan_in.max(1) as f64);
            let weights = (0..fan_in * fan_out).map(|_| rng.gen_range(-bound..=bound)).collect();
            let activation = if i + 2 == dims.len() { head } else { hidden_activation };
            layers.push(Layer::new(fan_in, fan_out, weights, alloc::vec![0.0; fan_out], activation)?);
        }
        Self::new(layers)
    }

    /// A network whose every weight and bias is zero.
    pub fn zeros(input_dim: usize, hidden: &[usize], hidden_activation: Activation, output_dim: usize, head: Activation) -> Self {
        let mut dims = alloc::vec![input_dim];
        dims.extend_from_slice(hidden);
        dims.push(output_dim);
        let n = dims.len() - 1;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, p)| Layer::zeros(p[0], p[1], if i + 1 == n { head } else { hidden_activation }))
            .collect();
        Self::new(layers).expect("consistent dimensions")
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn head(&self) -> Activation {
        self.layers[self.layers.len() - 1].activation
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut z = Vec::new();
        for layer in &self.layers {
            layer.affine(&cur, &mut z);
            activate(layer.activation, &z, &mut cur);
        }
        Ok(cur)
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NnError> {
        if x.len() != self.input_dim() {
            return Err(NnError::DimensionMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFiniteInput);
        }
        Ok(())
    }

    fn check_loss(&self, loss: Loss) -> Result<(), NnError> {
        match loss {
            Loss::Bce if self.head() != Activation::Sigmoid || self.output_dim() != 1 => Err(NnError::IncompatibleLoss {
                loss,
                required: "a single sigmoid output",
            }),
            Loss::Cce if self.head() != Activation::Softmax => Err(NnError::IncompatibleLoss {
                loss,
                required: "a softmax output layer",
            }),
            _ => Ok(()),
        }
    }

    fn check_sample(&self, x: &[f64], y: &[f64], loss: Loss) -> Result<(), NnError> {
        self.check_input(x)?;
        self.check_loss(loss)?;
        if y.len() != self.output_dim() {
            return Err(NnError::DimensionMismatch {
                expected: self.output_dim(),
                found: y.len(),
            });
        }
        Ok(())
    }

    fn param_mut(&mut self, layer: usize, is_bias: bool, k: usize) -> &mut f64 {
        let layer = &mut self.layers[layer];
        if is_bias {
            &mut layer.bias[k]
        } else {
            &mut layer.weights[k]
        }
    }

    /// Pre-activations and activations of every layer.
    fn forward_cached(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut zs = Vec::with_capacity(self.layers.len());
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for layer in &self.layers {
            let mut z = Vec::with_capacity(layer.outputs);
            layer.affine(acts.last().expect("input pushed"), &mut z);
            let mut a = Vec::with_capacity(layer.outputs);
            activate(layer.activation, &z, &mut a);
            zs.push(z);
            acts.push(a);
        }
        (zs, acts)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + libm::log(z.iter().map(|v| libm::exp(v - max)).sum::<f64>())
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(z);
    z.iter().map(|v| libm::exp(v - lse)).collect()
}

fn activate(act: Activation, z: &[f64], out: &mut Vec<f64>) {
    out.clear();
    match act {
        Activation::Relu => out.extend(z.iter().map(|v| v.max(0.0))),
        Activation::Sigmoid => out.extend(z.iter().map(|&v| sigmoid(v))),
        Activation::Identity => out.extend_from_slice(z),
        Activation::Softmax => out.extend(softmax(z)),
    }
}

fn activation_derivative(act: Activation, z: f64, a: f64) -> f64 {
    match act {
        Activation::Relu => {
            if z > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Activation::Sigmoid => a * (1.0 - a),
        Activation::Identity => 1.0,
        Activation::Softmax => unreachable!("softmax is only a head"),
    }
}

/// Loss of one sample given the output layer's pre-activations.
fn sample_loss(loss: Loss, z_out: &[f64], y: &[f64]) -> f64 {
    let floor = libm::log(PROB_FLOOR);
    match loss {
        Loss::Bce => {
            let z = z_out[0];
            let t = y[0];
            // -log p and -log(1-p) from logits, each capped at -log(PROB_FLOOR)
            let log_p = -(libm::log1p(libm::exp(-z.abs())) + (-z).max(0.0));
            let log_q = -(libm::log1p(libm::exp(-z.abs())) + z.max(0.0));
            -(t * log_p.max(floor) + (1.0 - t) * log_q.max(floor))
        }
        Loss::Cce => {
            let lse = log_sum_exp(z_out);
            -z_out.iter().zip(y).map(|(z, t)| t * (z - lse).max(floor)).sum::<f64>()
        }
    }
}

/// Mean loss over a dataset.
pub fn dataset_loss(params: &ModelParams, data: &[Example], loss: Loss) -> Result<f64, NnError> {
    if data.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let mut total = 0.0;
    for ex in data {
        params.check_sample(&ex.x, &ex.y, loss)?;
        let (zs, _) = params.forward_cached(&ex.x);
        total += sample_loss(loss, zs.last().expect("non-empty network"), &ex.y);
    }
    Ok(total / data.len() as f64)
}

/// Gradient of one sample's loss, laid out like the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(params: &ModelParams) -> Self {
        Self {
            weights: params.layers.iter().map(|l| alloc::vec![0.0; l.weights.len()]).collect(),
            bias: params.layers.iter().map(|l| alloc::vec![0.0; l.bias.len()]).collect(),
        }
    }

    fn clear(&mut self) {
        self.weights.iter_mut().chain(self.bias.iter_mut()).for_each(|g| g.fill(0.0));
    }
}

fn accumulate_gradients(params: &ModelParams, x: &[f64], y: &[f64], grads: &mut Gradients) {
    let (zs, acts) = params.forward_cached(x);
    let last = params.layers.len() - 1;
    // Sigmoid + BCE and softmax + CCE both reduce to prediction - target.
    let mut delta: Vec<f64> = acts[last + 1].iter().zip(y).map(|(p, t)| p - t).collect();
    for l in (0..=last).rev() {
        let layer = &params.layers[l];
        let input = &acts[l];
        for (o, d) in delta.iter().enumerate() {
            grads.bias[l][o] += d;
            let row = &mut grads.weights[l][o * layer.inputs..(o + 1) * layer.inputs];
            for (g, v) in row.iter_mut().zip(input) {
                *g += d * v;
            }
        }
        if l > 0 {
            let prev = &params.layers[l - 1];
            let mut next = alloc::vec![0.0; layer.inputs];
            for (o, d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (n, w) in next.iter_mut().zip(row) {
                    *n += w * d;
                }
            }
            for (i, n) in next.iter_mut().enumerate() {
                *n *= activation_derivative(prev.activation, zs[l - 1][i], acts[l][i]);
            }
            delta = next;
        }
    }
}

/// Analytic gradient of the loss for one sample.
pub fn gradients(params: &ModelParams, x: &[f64], y: &[f64], loss: Loss) -> Result<Gradients, NnError> {
    params.check_sample(x, y, loss)?;
    let mut g = Gradients::zeros_like(params);
    accumulate_gradients(params, x, y, &mut g);
    Ok(g)
}

/// Largest relative difference between the analytic gradient and central
/// finite differences over every parameter. Gradients below
/// [`GRAD_CHECK_FLOOR`] in magnitude are compared against that floor.
pub fn gradient_check(params: &ModelParams, x: &[f64], y: &[f64], loss: Loss) -> Result<f64, NnError> {
    let analytic = gradients(params, x, y, loss)?;
    let mut probe = params.clone();
    let eval = |p: &ModelParams| {
        let (zs, _) = p.forward_cached(x);
        sample_loss(loss, zs.last().expect("non-empty network"), y)
    };
    let mut worst: f64 = 0.0;
    for l in 0..params.layers.len() {
        for is_bias in [false, true] {
            let n = if is_bias {
                params.layers[l].bias.len()
            } else {
                params.layers[l].weights.len()
            };
            for k in 0..n {
                let orig = *probe.param_mut(l, is_bias, k);
                *probe.param_mut(l, is_bias, k) = orig + FD_STEP;
                let plus = eval(&probe);
                *probe.param_mut(l, is_bias, k) = orig - FD_STEP;
                let minus = eval(&probe);
                *probe.param_mut(l, is_bias, k) = orig;
                let numeric = (plus - minus) / (2.0 * FD_STEP);
                let a = if is_bias {
                    analytic.bias[l][k]
                } else {
                    analytic.weights[l][k]
                };
                let denom = a.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
                worst = worst.max((a - numeric).abs() / denom);
            }
        }
    }
    Ok(worst)
}

/// A training sample: features and target (`[0|1]` for BCE, one-hot for CCE).
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 50,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NnError::InvalidConfig("learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(NnError::InvalidConfig("batch size must be positive"));
        }
        Ok(())
    }
}

/// Trains a copy of `params` with mini-batch SGD. Sample order is shuffled
/// every epoch from `config.seed`, so runs are bitwise reproducible.
pub fn train(params: &ModelParams, data: &[Example], loss: Loss, config: &TrainConfig) -> Result<ModelParams, NnError> {
    train_with(params, data, loss, config, |_, _| {})
}

/// Like [`train`], also returning the full-dataset loss after each epoch.
pub fn train_with_history(
    params: &ModelParams,
    data: &[Example],
    loss: Loss,
    config: &TrainConfig,
) -> Result<(ModelParams, Vec<f64>), NnError> {
    let mut history = Vec::with_capacity(config.epochs);
    let trained = train_with(params, data, loss, config, |_, p| {
        history.push(dataset_loss(p, data, loss).expect("dataset already checked"));
    })?;
    Ok((trained, history))
}

fn train_with(
    params: &ModelParams,
    data: &[Example],
    loss: Loss,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, &ModelParams),
) -> Result<ModelParams, NnError> {
    config.validate()?;
    if data.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    for ex in data {
        params.check_sample(&ex.x, &ex.y, loss)?;
    }
    let mut model = params.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grads = Gradients::zeros_like(&model);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            grads.clear();
            for &i in batch {
                accumulate_gradients(&model, &data[i].x, &data[i].y, &mut grads);
            }
            let step = config.learning_rate / batch.len() as f64;
            for (layer, (gw, gb)) in model.layers.iter_mut().zip(grads.weights.iter().zip(&grads.bias)) {
                for (w, g) in layer.weights.iter_mut().zip(gw) {
                    *w -= step * g;
                }
                for (b, g) in layer.bias.iter_mut().zip(gb) {
                    *b -= step * g;
                }
            }
        }
        on_epoch(epoch, &model);
    }
    if model.layers.iter().any(|l| l.weights.iter().chain(&l.bias).any(|v| !v.is_finite())) {
        return Err(NnError::NonFiniteParams);
    }
    Ok(model)
}
