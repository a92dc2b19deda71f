//! Plain-loop reference computations shared by the integration tests. Nothing
//! here goes through the crate's forward pass or gradient code.

#![allow(dead_code)]

use online_rnn_core::learner::{Learner, StepData};
use online_rnn_core::linalg::Matrix;
use online_rnn_core::rng::{self, Stream};
use online_rnn_core::rnn::{InitConfig, RnnConfig, RnnParams, RnnState};
use online_rnn_core::tasks::{AddConfig, AddStream, Sample};

pub fn problem(n: usize, steps: usize, seed: u64) -> (RnnConfig, RnnParams, Vec<Sample>) {
    let cfg = RnnConfig::classifier(n, 2, 2, 1.0).unwrap();
    let init = InitConfig {
        bias_std: 0.5,
        out_bias_std: 0.5,
        ..InitConfig::default()
    };
    let params = RnnParams::init_with(&cfg, &init, &mut rng::stream(seed, Stream::Weights));
    let samples = AddStream::new(AddConfig::default(), seed).unwrap().take(steps).collect();
    (cfg, params, samples)
}

/// Softmax cross-entropy summed over the sequence, from the zero state.
pub fn reference_loss(alpha: f64, w: &[Vec<f64>], w_out: &[Vec<f64>], samples: &[Sample]) -> f64 {
    let n = w.len();
    let mut a = vec![0.0; n];
    let mut total = 0.0;
    for s in samples {
        let mut a_hat = a.clone();
        a_hat.extend_from_slice(&s.x);
        a_hat.push(1.0);
        a = (0..n)
            .map(|i| {
                let h: f64 = w[i].iter().zip(&a_hat).map(|(p, q)| p * q).sum();
                (1.0 - alpha) * a[i] + alpha * h.tanh()
            })
            .collect();
        let z: Vec<f64> = w_out
            .iter()
            .map(|row| row[..n].iter().zip(&a).map(|(p, q)| p * q).sum::<f64>() + row[n])
            .collect();
        let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = zmax + z.iter().map(|v| (v - zmax).exp()).sum::<f64>().ln();
        total -= z.iter().zip(&s.y_star).map(|(zk, t)| t * (zk - lse)).sum::<f64>();
    }
    total
}

pub fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

/// Central-difference gradient of [`reference_loss`] with respect to `W`.
pub fn fd_gradient(cfg: &RnnConfig, params: &RnnParams, samples: &[Sample], eps: f64) -> Vec<Vec<f64>> {
    let mut w = rows(&params.w);
    let w_out = rows(&params.w_out);
    let mut grad = vec![vec![0.0; cfg.m()]; cfg.n];
    for i in 0..cfg.n {
        for j in 0..cfg.m() {
            let orig = w[i][j];
            w[i][j] = orig + eps;
            let up = reference_loss(cfg.alpha, &w, &w_out, samples);
            w[i][j] = orig - eps;
            let down = reference_loss(cfg.alpha, &w, &w_out, samples);
            w[i][j] = orig;
            grad[i][j] = (up - down) / (2.0 * eps);
        }
    }
    grad
}

pub fn flat(rows: &[Vec<f64>]) -> Vec<f64> {
    rows.iter().flatten().copied().collect()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Every gradient a learner emits along `samples` with frozen weights, then
/// its drained remainder, tagged with the step at which it appeared.
pub fn emissions(learner: &mut dyn Learner, cfg: &RnnConfig, params: &RnnParams, samples: &[Sample]) -> Vec<(usize, Matrix)> {
    let mut state = RnnState::zeros(cfg.n);
    let mut out = Vec::new();
    for (t, s) in samples.iter().enumerate() {
        let (next, data) = StepData::compute(cfg, params, &state, &s.x, &s.y_star).unwrap();
        if let Some(g) = learner.update(&data.context(cfg, params)).unwrap() {
            out.push((t, g));
        }
        state = next;
    }
    if let Some(g) = learner.drain() {
        out.push((samples.len(), g));
    }
    out
}

pub fn summed(emitted: &[(usize, Matrix)], n: usize, m: usize) -> Vec<f64> {
    let mut total = vec![0.0; n * m];
    for (_, g) in emitted {
        for (t, v) in total.iter_mut().zip(g.as_slice()) {
            *t += v;
        }
    }
    total
}

/// `J_kl = (1-α) δ_kl + α (1 - tanh²(h_k)) W_kl` written out entrywise.
pub fn reference_jacobian(alpha: f64, w: &[Vec<f64>], h: &[f64]) -> Vec<Vec<f64>> {
    let n = w.len();
    (0..n)
        .map(|k| {
            let d = 1.0 - h[k].tanh().powi(2);
            (0..n)
                .map(|l| if k == l { 1.0 - alpha } else { 0.0 } + alpha * d * w[k][l])
                .collect()
        })
        .collect()
}

/// Dense `M̄[k][i·m + j] = α δ_ki (1 - tanh²(h_k)) â_j`.
pub fn reference_mbar(alpha: f64, h: &[f64], a_hat: &[f64]) -> Vec<Vec<f64>> {
    let (n, m) = (h.len(), a_hat.len());
    (0..n)
        .map(|k| {
            let mut row = vec![0.0; n * m];
            let d = alpha * (1.0 - h[k].tanh().powi(2));
            for j in 0..m {
                row[k * m + j] = d * a_hat[j];
            }
            row
        })
        .collect()
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter()
        .map(|row| {
            (0..b[0].len())
                .map(|c| row.iter().zip(b).map(|(x, brow)| x * brow[c]).sum())
                .collect()
        })
        .collect()
}

pub fn add(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect())
        .collect()
}
