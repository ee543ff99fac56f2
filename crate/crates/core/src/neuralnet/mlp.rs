use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    check_finite, check_two_classes, logistic, one_hot_label, softmax, softmax_sq_error_delta,
    squared_error_loss, Matrix, TrainConfig,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Logistic,
    Softmax,
}

/// Feedforward network. `weights[l]` maps layer `l` to layer `l + 1` and has
/// shape `layer_sizes[l + 1] x layer_sizes[l]`; `activations[l]` applies to
/// layer `l + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MLPParams {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
    pub activations: Vec<Activation>,
}

impl MLPParams {
    /// Logistic hidden layers, softmax output, weights uniform in
    /// `[-scale, scale]`, zero biases.
    pub fn init(layer_sizes: &[usize], scale: f64, seed: u64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::config("network needs an input and an output layer"));
        }
        if layer_sizes[1..].contains(&0) {
            return Err(Error::config(format!("zero-width layer in {layer_sizes:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = layer_sizes.len() - 1;
        let weights = layer_sizes
            .windows(2)
            .map(|w| Matrix::uniform(w[1], w[0], scale, &mut rng))
            .collect();
        let biases = layer_sizes[1..].iter().map(|&s| vec![0.0; s]).collect();
        let mut activations = vec![Activation::Logistic; n];
        activations[n - 1] = Activation::Softmax;
        let p = MLPParams {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            activations,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.layer_sizes.len();
        if n < 2 || self.weights.len() != n - 1 || self.biases.len() != n - 1 || self.activations.len() != n - 1 {
            return Err(Error::shape("layer, weight, bias and activation counts disagree"));
        }
        for (l, w) in self.weights.iter().enumerate() {
            if w.rows != self.layer_sizes[l + 1] || w.cols != self.layer_sizes[l] || w.data.len() != w.rows * w.cols {
                return Err(Error::shape(format!(
                    "weight {l} is {}x{}, expected {}x{}",
                    w.rows,
                    w.cols,
                    self.layer_sizes[l + 1],
                    self.layer_sizes[l]
                )));
            }
            if self.biases[l].len() != w.rows {
                return Err(Error::shape(format!("bias {l} has wrong length")));
            }
        }
        if self.layer_sizes[n - 1] != 2 || self.activations[n - 2] != Activation::Softmax {
            return Err(Error::shape("output layer must be a 2-way softmax"));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }
}

/// Activations of every layer; `layers[0]` is the input, the last entry the
/// output probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct MLPForward {
    pub layers: Vec<Vec<f64>>,
}

impl MLPForward {
    pub fn output(&self) -> &[f64] {
        self.layers.last().expect("at least the input layer")
    }
}

pub fn mlp_forward(params: &MLPParams, features: &[f64]) -> Result<MLPForward> {
    if features.len() != params.input_width() {
        return Err(Error::shape(format!(
            "feature vector has length {}, network expects {}",
            features.len(),
            params.input_width()
        )));
    }
    let mut layers = Vec::with_capacity(params.layer_sizes.len());
    layers.push(features.to_vec());
    for ((w, b), act) in params.weights.iter().zip(&params.biases).zip(&params.activations) {
        let mut z = w.matvec(layers.last().unwrap());
        for (zi, bi) in z.iter_mut().zip(b) {
            *zi += bi;
        }
        let a = match act {
            Activation::Logistic => z.into_iter().map(logistic).collect(),
            Activation::Softmax => softmax(&z),
        };
        layers.push(a);
    }
    Ok(MLPForward { layers })
}

/// Gradients with the same shapes as the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MLPGrads {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl MLPGrads {
    pub fn zeros_like(p: &MLPParams) -> Self {
        MLPGrads {
            weights: p.weights.iter().map(|w| Matrix::zeros(w.rows, w.cols)).collect(),
            biases: p.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    fn add(&mut self, other: &MLPGrads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.add(b);
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.weights.iter_mut().for_each(|w| w.scale(s));
        self.biases.iter_mut().flatten().for_each(|b| *b *= s);
    }
}

fn check_label(label: &[f64]) -> Result<()> {
    if label.len() != 2 {
        return Err(Error::shape(format!("label has length {}, expected 2", label.len())));
    }
    Ok(())
}

/// Backpropagation of the squared error for one example.
pub fn mlp_gradients(params: &MLPParams, features: &[f64], label: &[f64]) -> Result<MLPGrads> {
    check_label(label)?;
    let mut grads = MLPGrads::zeros_like(params);
    accumulate(params, features, label, 1.0, &mut grads)?;
    Ok(grads)
}

/// Adds `weight` times the example's gradient into `grads` and returns its
/// loss.
fn accumulate(params: &MLPParams, features: &[f64], label: &[f64], weight: f64, grads: &mut MLPGrads) -> Result<f64> {
    let fwd = mlp_forward(params, features)?;
    let loss = squared_error_loss(fwd.output(), label);
    let n = params.weights.len();
    let mut delta: Vec<f64> = softmax_sq_error_delta(fwd.output(), label)
        .into_iter()
        .map(|d| d * weight)
        .collect();
    for l in (0..n).rev() {
        grads.weights[l].add_outer(&delta, &fwd.layers[l]);
        grads.biases[l].iter_mut().zip(&delta).for_each(|(g, d)| *g += d);
        if l == 0 {
            break;
        }
        let back = params.weights[l].matvec_t(&delta);
        // layer l is a hidden logistic layer
        delta = back
            .iter()
            .zip(&fwd.layers[l])
            .map(|(d, a)| d * a * (1.0 - a))
            .collect();
    }
    Ok(loss)
}

/// Sum of per-example gradients, accumulated in example order.
pub fn mlp_batch_gradients(params: &MLPParams, x: &[Vec<f64>], y: &[bool]) -> Result<MLPGrads> {
    if x.len() != y.len() {
        return Err(Error::shape(format!("{} feature rows but {} labels", x.len(), y.len())));
    }
    let mut total = MLPGrads::zeros_like(params);
    for (xi, &yi) in x.iter().zip(y) {
        total.add(&mlp_gradients(params, xi, &one_hot_label(yi))?);
    }
    Ok(total)
}

/// Mean per-example squared error.
pub fn mlp_loss(params: &MLPParams, x: &[Vec<f64>], y: &[bool]) -> Result<f64> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::shape("empty data or feature/label count mismatch"));
    }
    let mut sum = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        let fwd = mlp_forward(params, xi)?;
        sum += squared_error_loss(fwd.output(), &one_hot_label(yi));
    }
    Ok(sum / x.len() as f64)
}

/// `W ← W − alpha · ∇`.
pub fn gradient_descent_step(params: &mut MLPParams, grads: &MLPGrads, alpha: f64) -> Result<()> {
    if !(alpha >= 0.0) {
        return Err(Error::config(format!("alpha must be >= 0, got {alpha}")));
    }
    if grads.weights.len() != params.weights.len()
        || grads
            .weights
            .iter()
            .zip(&params.weights)
            .any(|(g, w)| !g.same_shape(w))
    {
        return Err(Error::shape("gradient shapes do not match parameters"));
    }
    for (w, g) in params.weights.iter_mut().zip(&grads.weights) {
        w.sub_scaled(g, alpha);
    }
    for (b, g) in params.biases.iter_mut().zip(&grads.biases) {
        b.iter_mut().zip(g).for_each(|(bi, gi)| *bi -= alpha * gi);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedMlp {
    pub params: MLPParams,
    /// Mean loss before each update, plus the final loss.
    pub loss_trace: Vec<f64>,
}

/// Full-batch gradient descent on the mean squared error, from a seeded
/// initialization, until the loss reaches the threshold or the epoch budget
/// runs out.
pub fn train_mlp(x: &[Vec<f64>], y: &[bool], hidden: &[usize], cfg: &TrainConfig) -> Result<TrainedMlp> {
    cfg.validate()?;
    check_two_classes(y)?;
    if x.len() != y.len() {
        return Err(Error::shape(format!("{} feature rows but {} labels", x.len(), y.len())));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite feature value"));
    }
    let width = x[0].len();
    if let Some(row) = x.iter().find(|r| r.len() != width) {
        return Err(Error::shape(format!("ragged feature rows: {} vs {width}", row.len())));
    }
    let mut sizes = vec![width];
    sizes.extend_from_slice(hidden);
    sizes.push(2);
    let mut params = MLPParams::init(&sizes, cfg.init_scale, cfg.seed)?;
    let examples = dedup_examples(x, y);
    let inv_n = 1.0 / x.len() as f64;
    let mut trace = Vec::new();
    for epoch in 0..=cfg.max_epochs {
        let mut grads = MLPGrads::zeros_like(&params);
        let mut loss = 0.0;
        for (xi, yi, count) in &examples {
            loss += accumulate(&params, xi, &one_hot_label(*yi), *count as f64 * inv_n, &mut grads)?
                * *count as f64;
        }
        loss *= inv_n;
        check_finite(epoch, loss)?;
        trace.push(loss);
        if loss <= cfg.loss_threshold || epoch == cfg.max_epochs {
            break;
        }
        gradient_descent_step(&mut params, &grads, cfg.alpha)?;
    }
    Ok(TrainedMlp { params, loss_trace: trace })
}

/// Identical examples merged, with multiplicities, in first-seen order. The
/// full-batch gradient is a sum over examples, so this changes nothing but
/// the cost.
fn dedup_examples<'a>(x: &'a [Vec<f64>], y: &[bool]) -> Vec<(&'a [f64], bool, usize)> {
    let mut index: HashMap<(Vec<u64>, bool), usize> = HashMap::new();
    let mut out: Vec<(&[f64], bool, usize)> = Vec::new();
    for (xi, &yi) in x.iter().zip(y) {
        let key = (xi.iter().map(|v| v.to_bits()).collect(), yi);
        match index.get(&key) {
            Some(&j) => out[j].2 += 1,
            None => {
                index.insert(key, out.len());
                out.push((xi, yi, 1));
            }
        }
    }
    out
}
