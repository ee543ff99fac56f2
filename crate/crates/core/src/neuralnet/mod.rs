//! Classifiers trained from scratch by gradient descent.
//!
//! Both networks end in a two-way softmax (index 0 = non-accident,
//! 1 = accident) and are trained on the squared error
//! `½ Σ (y_i − b_i)²` against the one-hot label, full batch.

mod lstm;
mod mlp;
mod model;

pub use lstm::{
    lstm_classify, lstm_cell_step, lstm_gradients, lstm_loss, train_lstm, LSTMGrads, LSTMParams,
    TrainedLstm,
};
pub use mlp::{
    gradient_descent_step, mlp_batch_gradients, mlp_forward, mlp_gradients, mlp_loss, train_mlp,
    Activation, MLPForward, MLPGrads, MLPParams, TrainedMlp,
};
pub use model::{Architecture, Model, Network};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default hidden layer widths of the feedforward network.
pub const DEFAULT_HIDDEN: [usize; 2] = [10, 5];

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn uniform<R: Rng>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Self {
        let data = (0..rows * cols)
            .map(|_| if scale > 0.0 { rng.gen_range(-scale..=scale) } else { 0.0 })
            .collect();
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix {
            rows: rows.len(),
            cols,
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `self · x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    /// `selfᵀ · y`.
    pub fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.row(r)) {
                *o += w * yr;
            }
        }
        out
    }

    /// `self += u · vᵀ`.
    pub fn add_outer(&mut self, u: &[f64], v: &[f64]) {
        for (r, &ur) in u.iter().enumerate() {
            if ur == 0.0 {
                continue;
            }
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (w, &vc) in row.iter_mut().zip(v) {
                *w += ur * vc;
            }
        }
    }

    /// `self -= alpha · g`.
    pub fn sub_scaled(&mut self, g: &Matrix, alpha: f64) {
        for (w, d) in self.data.iter_mut().zip(&g.data) {
            *w -= alpha * d;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|w| *w *= s);
    }

    fn add(&mut self, other: &Matrix) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    fn same_shape(&self, other: &Matrix) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Gradient of the squared error w.r.t. the softmax logits, given the
/// softmax output `p` and the one-hot target `y`.
pub(crate) fn softmax_sq_error_delta(p: &[f64], y: &[f64]) -> Vec<f64> {
    let e: Vec<f64> = p.iter().zip(y).map(|(pi, yi)| pi - yi).collect();
    let s = dot(&e, p);
    p.iter().zip(&e).map(|(pi, ei)| pi * (ei - s)).collect()
}

/// `½ Σ (y_i − b_i)²`.
pub fn squared_error_loss(output: &[f64], label: &[f64]) -> f64 {
    0.5 * output
        .iter()
        .zip(label)
        .map(|(b, y)| (y - b).powi(2))
        .sum::<f64>()
}

pub fn one_hot_label(accident: bool) -> [f64; 2] {
    if accident {
        [0.0, 1.0]
    } else {
        [1.0, 0.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub alpha: f64,
    /// Training stops once the mean per-example loss is at or below this.
    pub loss_threshold: f64,
    pub max_epochs: usize,
    pub seed: u64,
    /// Weights start uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 2.0,
            loss_threshold: 1e-3,
            max_epochs: 3000,
            seed: 0,
            init_scale: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if self.max_epochs < 1 {
            return Err(Error::config("max_epochs must be >= 1"));
        }
        if !(self.loss_threshold >= 0.0) {
            return Err(Error::config(format!(
                "loss_threshold must be >= 0, got {}",
                self.loss_threshold
            )));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::config(format!(
                "init_scale must be >= 0, got {}",
                self.init_scale
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_two_classes(labels: &[bool]) -> Result<()> {
    if labels.len() < 2 {
        return Err(Error::invalid("training needs at least 2 examples"));
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::invalid("training data contains a single class"));
    }
    Ok(())
}

pub(crate) fn check_finite(epoch: usize, loss: f64) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence { epoch, loss })
    }
}
