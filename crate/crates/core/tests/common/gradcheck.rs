//! Central finite-difference gradient oracle shared by the gradient tests.

use crashtweet_core::neuralnet::{
    lstm_classify, lstm_gradients, mlp_forward, mlp_gradients, one_hot_label, squared_error_loss, LSTMParams,
    MLPParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const H: f64 = 1e-5;

fn mlp_slots(p: &mut MLPParams) -> Vec<&mut Vec<f64>> {
    let mut v: Vec<&mut Vec<f64>> = p.weights.iter_mut().map(|w| &mut w.data).collect();
    v.extend(p.biases.iter_mut());
    v
}

fn lstm_slots(p: &mut LSTMParams) -> Vec<&mut Vec<f64>> {
    vec![
        &mut p.w_f.data,
        &mut p.w_i.data,
        &mut p.w_c.data,
        &mut p.w_o.data,
        &mut p.b_f,
        &mut p.b_i,
        &mut p.b_c,
        &mut p.b_o,
        &mut p.head_w.data,
        &mut p.head_b,
    ]
}

fn central_differences<P: Clone>(p: &P, slots: fn(&mut P) -> Vec<&mut Vec<f64>>, loss: &dyn Fn(&P) -> f64) -> Vec<f64> {
    let mut probe = p.clone();
    let lens: Vec<usize> = slots(&mut probe).iter().map(|s| s.len()).collect();
    let mut out = Vec::new();
    for (s, &len) in lens.iter().enumerate() {
        for k in 0..len {
            let mut q = p.clone();
            slots(&mut q)[s][k] += H;
            let up = loss(&q);
            let mut q = p.clone();
            slots(&mut q)[s][k] -= H;
            let down = loss(&q);
            out.push((up - down) / (2.0 * H));
        }
    }
    out
}

/// `‖a − n‖ / ‖a + n‖` over the whole gradient.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let sum: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a + n).powi(2)).sum::<f64>().sqrt();
    if sum == 0.0 {
        0.0
    } else {
        diff / sum
    }
}

/// Random network, input and label; returns the gradient relative error.
pub fn mlp_instance(sizes: &[usize], seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = MLPParams::init(sizes, 1.0, seed).unwrap();
    for b in p.biases.iter_mut().flatten() {
        *b = rng.gen_range(-1.0..1.0);
    }
    let x: Vec<f64> = (0..sizes[0]).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y = one_hot_label(rng.gen());
    let mut g = mlp_gradients(&p, &x, &y).unwrap();
    let analytic: Vec<f64> = g.weights.iter_mut().map(|w| w.data.clone()).chain(g.biases.clone()).flatten().collect();
    let numeric = central_differences(&p, mlp_slots, &|q: &MLPParams| {
        squared_error_loss(mlp_forward(q, &x).unwrap().output(), &y)
    });
    relative_error(&analytic, &numeric)
}

pub fn lstm_instance(input_dim: usize, hidden_dim: usize, len: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = LSTMParams::init(input_dim, hidden_dim, 1.0, seed).unwrap();
    for b in [&mut p.b_f, &mut p.b_i, &mut p.b_c, &mut p.b_o, &mut p.head_b] {
        b.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
    }
    let seq: Vec<Vec<f64>> = (0..len)
        .map(|_| (0..input_dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let y = one_hot_label(rng.gen());
    let mut g = lstm_gradients(&p, &seq, &y).unwrap();
    let analytic: Vec<f64> = lstm_slots(&mut g).into_iter().flat_map(|s| s.clone()).collect();
    let numeric = central_differences(&p, lstm_slots, &|q: &LSTMParams| {
        squared_error_loss(&lstm_classify(q, &seq).unwrap(), &y)
    });
    relative_error(&analytic, &numeric)
}
