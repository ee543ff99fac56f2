use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    check_finite, check_two_classes, logistic, one_hot_label, softmax, softmax_sq_error_delta,
    squared_error_loss, Matrix, TrainConfig,
};
use crate::error::{Error, Result};

/// LSTM cell plus a softmax head on the last hidden state. Every gate
/// matrix acts on the concatenation `[h_{t-1}; x_t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LSTMParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_f: Matrix,
    pub w_i: Matrix,
    pub w_c: Matrix,
    pub w_o: Matrix,
    pub b_f: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_c: Vec<f64>,
    pub b_o: Vec<f64>,
    /// `2 x hidden_dim`.
    pub head_w: Matrix,
    pub head_b: Vec<f64>,
}

impl LSTMParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let gate = || Matrix::zeros(hidden_dim, hidden_dim + input_dim);
        LSTMParams {
            input_dim,
            hidden_dim,
            w_f: gate(),
            w_i: gate(),
            w_c: gate(),
            w_o: gate(),
            b_f: vec![0.0; hidden_dim],
            b_i: vec![0.0; hidden_dim],
            b_c: vec![0.0; hidden_dim],
            b_o: vec![0.0; hidden_dim],
            head_w: Matrix::zeros(2, hidden_dim),
            head_b: vec![0.0; 2],
        }
    }

    /// Weights uniform in `[-scale, scale]`, zero biases.
    pub fn init(input_dim: usize, hidden_dim: usize, scale: f64, seed: u64) -> Result<Self> {
        if hidden_dim == 0 {
            return Err(Error::config("LSTM hidden_dim must be >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = LSTMParams::zeros(input_dim, hidden_dim);
        let cols = hidden_dim + input_dim;
        p.w_f = Matrix::uniform(hidden_dim, cols, scale, &mut rng);
        p.w_i = Matrix::uniform(hidden_dim, cols, scale, &mut rng);
        p.w_c = Matrix::uniform(hidden_dim, cols, scale, &mut rng);
        p.w_o = Matrix::uniform(hidden_dim, cols, scale, &mut rng);
        p.head_w = Matrix::uniform(2, hidden_dim, scale, &mut rng);
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let (h, cols) = (self.hidden_dim, self.hidden_dim + self.input_dim);
        for (name, w) in [("f", &self.w_f), ("i", &self.w_i), ("C", &self.w_c), ("o", &self.w_o)] {
            if w.rows != h || w.cols != cols || w.data.len() != h * cols {
                return Err(Error::shape(format!("gate {name} is {}x{}, expected {h}x{cols}", w.rows, w.cols)));
            }
        }
        for b in [&self.b_f, &self.b_i, &self.b_c, &self.b_o] {
            if b.len() != h {
                return Err(Error::shape("gate bias length differs from hidden_dim"));
            }
        }
        if self.head_w.rows != 2 || self.head_w.cols != h || self.head_b.len() != 2 {
            return Err(Error::shape("head must map hidden_dim to 2"));
        }
        Ok(())
    }

    fn for_each_pair<F: FnMut(&mut [f64], &[f64])>(&mut self, g: &LSTMGrads, mut f: F) {
        f(&mut self.w_f.data, &g.w_f.data);
        f(&mut self.w_i.data, &g.w_i.data);
        f(&mut self.w_c.data, &g.w_c.data);
        f(&mut self.w_o.data, &g.w_o.data);
        f(&mut self.b_f, &g.b_f);
        f(&mut self.b_i, &g.b_i);
        f(&mut self.b_c, &g.b_c);
        f(&mut self.b_o, &g.b_o);
        f(&mut self.head_w.data, &g.head_w.data);
        f(&mut self.head_b, &g.head_b);
    }
}

/// Gradients share the parameter layout.
pub type LSTMGrads = LSTMParams;

struct StepCache {
    z: Vec<f64>,
    f: Vec<f64>,
    i: Vec<f64>,
    c_tilde: Vec<f64>,
    o: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
}

fn affine(w: &Matrix, b: &[f64], z: &[f64]) -> Vec<f64> {
    let mut v = w.matvec(z);
    v.iter_mut().zip(b).for_each(|(a, bi)| *a += bi);
    v
}

fn step(p: &LSTMParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> (Vec<f64>, Vec<f64>, StepCache) {
    let mut z = Vec::with_capacity(p.hidden_dim + p.input_dim);
    z.extend_from_slice(h_prev);
    z.extend_from_slice(x);
    let f: Vec<f64> = affine(&p.w_f, &p.b_f, &z).into_iter().map(logistic).collect();
    let i: Vec<f64> = affine(&p.w_i, &p.b_i, &z).into_iter().map(logistic).collect();
    let c_tilde: Vec<f64> = affine(&p.w_c, &p.b_c, &z).into_iter().map(f64::tanh).collect();
    let o: Vec<f64> = affine(&p.w_o, &p.b_o, &z).into_iter().map(logistic).collect();
    let c: Vec<f64> = (0..p.hidden_dim)
        .map(|k| f[k] * c_prev[k] + i[k] * c_tilde[k])
        .collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = o.iter().zip(&tanh_c).map(|(a, b)| a * b).collect();
    let cache = StepCache {
        z,
        f,
        i,
        c_tilde,
        o,
        c_prev: c_prev.to_vec(),
        tanh_c,
    };
    (h, c, cache)
}

/// One cell update, returning `(h_t, C_t)`.
pub fn lstm_cell_step(p: &LSTMParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    p.validate()?;
    if x.len() != p.input_dim || h_prev.len() != p.hidden_dim || c_prev.len() != p.hidden_dim {
        return Err(Error::shape(format!(
            "cell expects input {} and state {}, got {}, {}, {}",
            p.input_dim,
            p.hidden_dim,
            x.len(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    let (h, c, _) = step(p, x, h_prev, c_prev);
    Ok((h, c))
}

fn check_sequence(p: &LSTMParams, seq: &[Vec<f64>]) -> Result<()> {
    if seq.is_empty() {
        return Err(Error::invalid("no selected tokens in tweet"));
    }
    if let Some(x) = seq.iter().find(|x| x.len() != p.input_dim) {
        return Err(Error::shape(format!(
            "sequence element has length {}, expected {}",
            x.len(),
            p.input_dim
        )));
    }
    Ok(())
}

fn run(p: &LSTMParams, seq: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>, Vec<StepCache>) {
    let mut h = vec![0.0; p.hidden_dim];
    let mut c = vec![0.0; p.hidden_dim];
    let mut caches = Vec::with_capacity(seq.len());
    for x in seq {
        let (h2, c2, cache) = step(p, x, &h, &c);
        h = h2;
        c = c2;
        caches.push(cache);
    }
    let out = softmax(&affine(&p.head_w, &p.head_b, &h));
    (h, out, caches)
}

/// Class probabilities for a sequence, starting from zero state.
pub fn lstm_classify(p: &LSTMParams, seq: &[Vec<f64>]) -> Result<[f64; 2]> {
    p.validate()?;
    check_sequence(p, seq)?;
    let (_, out, _) = run(p, seq);
    Ok([out[0], out[1]])
}

/// Backpropagation through time for one sequence.
pub fn lstm_gradients(p: &LSTMParams, seq: &[Vec<f64>], label: &[f64]) -> Result<LSTMGrads> {
    p.validate()?;
    check_sequence(p, seq)?;
    if label.len() != 2 {
        return Err(Error::shape("label must have length 2"));
    }
    let mut g = LSTMParams::zeros(p.input_dim, p.hidden_dim);
    accumulate(p, seq, label, 1.0, &mut g);
    Ok(g)
}

/// Adds `weight` times the sequence's gradient into `g` and returns its loss.
fn accumulate(p: &LSTMParams, seq: &[Vec<f64>], label: &[f64], weight: f64, g: &mut LSTMGrads) -> f64 {
    let hd = p.hidden_dim;
    let (h_last, out, caches) = run(p, seq);
    let loss = squared_error_loss(&out, label);

    let d_logits: Vec<f64> = softmax_sq_error_delta(&out, label)
        .into_iter()
        .map(|d| d * weight)
        .collect();
    g.head_w.add_outer(&d_logits, &h_last);
    g.head_b.iter_mut().zip(&d_logits).for_each(|(a, d)| *a += d);
    let mut dh = p.head_w.matvec_t(&d_logits);
    let mut dc = vec![0.0; hd];

    for cache in caches.iter().rev() {
        let mut dz_f = vec![0.0; hd];
        let mut dz_i = vec![0.0; hd];
        let mut dz_c = vec![0.0; hd];
        let mut dz_o = vec![0.0; hd];
        for k in 0..hd {
            let (f, i, ct, o, tc) = (cache.f[k], cache.i[k], cache.c_tilde[k], cache.o[k], cache.tanh_c[k]);
            dc[k] += dh[k] * o * (1.0 - tc * tc);
            dz_o[k] = dh[k] * tc * o * (1.0 - o);
            dz_f[k] = dc[k] * cache.c_prev[k] * f * (1.0 - f);
            dz_i[k] = dc[k] * ct * i * (1.0 - i);
            dz_c[k] = dc[k] * i * (1.0 - ct * ct);
            dc[k] *= f;
        }
        g.w_f.add_outer(&dz_f, &cache.z);
        g.w_i.add_outer(&dz_i, &cache.z);
        g.w_c.add_outer(&dz_c, &cache.z);
        g.w_o.add_outer(&dz_o, &cache.z);
        for k in 0..hd {
            g.b_f[k] += dz_f[k];
            g.b_i[k] += dz_i[k];
            g.b_c[k] += dz_c[k];
            g.b_o[k] += dz_o[k];
        }
        let mut dz = p.w_f.matvec_t(&dz_f);
        for (w, d) in [(&p.w_i, &dz_i), (&p.w_c, &dz_c), (&p.w_o, &dz_o)] {
            dz.iter_mut().zip(w.matvec_t(d)).for_each(|(a, b)| *a += b);
        }
        dh = dz[..hd].to_vec();
    }
    loss
}

/// Mean per-sequence squared error.
pub fn lstm_loss(p: &LSTMParams, seqs: &[Vec<Vec<f64>>], y: &[bool]) -> Result<f64> {
    if seqs.is_empty() || seqs.len() != y.len() {
        return Err(Error::shape("empty data or sequence/label count mismatch"));
    }
    let mut sum = 0.0;
    for (s, &l) in seqs.iter().zip(y) {
        sum += squared_error_loss(&lstm_classify(p, s)?, &one_hot_label(l));
    }
    Ok(sum / seqs.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedLstm {
    pub params: LSTMParams,
    pub loss_trace: Vec<f64>,
}

/// Full-batch gradient descent with BPTT. Empty sequences are skipped; they
/// cannot be classified by the network.
pub fn train_lstm(
    seqs: &[Vec<Vec<f64>>],
    y: &[bool],
    input_dim: usize,
    hidden_dim: usize,
    cfg: &TrainConfig,
) -> Result<TrainedLstm> {
    cfg.validate()?;
    if seqs.len() != y.len() {
        return Err(Error::shape(format!("{} sequences but {} labels", seqs.len(), y.len())));
    }
    let (seqs, y): (Vec<Vec<Vec<f64>>>, Vec<bool>) = seqs
        .iter()
        .zip(y)
        .filter(|(s, _)| !s.is_empty())
        .map(|(s, &l)| (s.clone(), l))
        .unzip();
    if seqs.is_empty() {
        return Err(Error::invalid("every training sequence is empty"));
    }
    check_two_classes(&y)?;
    let mut params = LSTMParams::init(input_dim, hidden_dim, cfg.init_scale, cfg.seed)?;
    params.validate()?;
    for s in &seqs {
        check_sequence(&params, s)?;
    }
    if seqs.iter().flatten().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite input value"));
    }
    let examples = dedup_sequences(&seqs, &y);
    let inv_n = 1.0 / seqs.len() as f64;
    let mut trace = Vec::new();
    for epoch in 0..=cfg.max_epochs {
        let mut total = LSTMParams::zeros(input_dim, hidden_dim);
        let mut loss = 0.0;
        for (s, l, count) in &examples {
            let w = *count as f64;
            loss += w * accumulate(&params, s, &one_hot_label(*l), w * inv_n, &mut total);
        }
        loss *= inv_n;
        check_finite(epoch, loss)?;
        trace.push(loss);
        if loss <= cfg.loss_threshold || epoch == cfg.max_epochs {
            break;
        }
        let alpha = cfg.alpha;
        params.for_each_pair(&total, |w, g| w.iter_mut().zip(g).for_each(|(x, d)| *x -= alpha * d));
    }
    Ok(TrainedLstm { params, loss_trace: trace })
}

/// Identical sequences merged, with multiplicities, in first-seen order.
fn dedup_sequences<'a>(seqs: &'a [Vec<Vec<f64>>], y: &[bool]) -> Vec<(&'a [Vec<f64>], bool, usize)> {
    let mut index: HashMap<(Vec<Vec<u64>>, bool), usize> = HashMap::new();
    let mut out: Vec<(&[Vec<f64>], bool, usize)> = Vec::new();
    for (s, &l) in seqs.iter().zip(y) {
        let key = (s.iter().map(|x| x.iter().map(|v| v.to_bits()).collect()).collect(), l);
        match index.get(&key) {
            Some(&j) => out[j].2 += 1,
            None => {
                index.insert(key, out.len());
                out.push((s, l, 1));
            }
        }
    }
    out
}
