//! Time-continuous vanilla RNN
//!
//! ```text
//! a(t) = (1 - α) a(t-1) + α φ(W â(t-1)),   â(t-1) = concat(a(t-1), x(t), 1)
//! ```
//!
//! plus readout, losses and the per-step derivative quantities every learner
//! consumes: the Jacobian, the immediate influence and the immediate credit.

use alloc::vec::Vec;
use rand::Rng;

use crate::error::{check_finite, check_len, Error, Result};
use crate::linalg::{dot, Matrix};
use crate::rng;

/// Probability floor inside the cross-entropy logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nonlinearity {
    Tanh,
}

impl Nonlinearity {
    #[inline]
    pub fn apply(self, h: f64) -> f64 {
        match self {
            Nonlinearity::Tanh => libm::tanh(h),
        }
    }

    #[inline]
    pub fn derivative(self, h: f64) -> f64 {
        match self {
            Nonlinearity::Tanh => {
                let t = libm::tanh(h);
                1.0 - t * t
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Readout {
    Softmax,
    Affine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    CrossEntropy,
    MeanSquaredError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnnConfig {
    pub n: usize,
    pub n_in: usize,
    pub n_out: usize,
    /// Inverse time constant, in `(0, 1]`.
    pub alpha: f64,
    pub nonlinearity: Nonlinearity,
    pub readout: Readout,
    pub loss: LossKind,
}

impl RnnConfig {
    pub fn new(
        n: usize,
        n_in: usize,
        n_out: usize,
        alpha: f64,
        readout: Readout,
        loss: LossKind,
    ) -> Result<Self> {
        let cfg = RnnConfig {
            n,
            n_in,
            n_out,
            alpha,
            nonlinearity: Nonlinearity::Tanh,
            readout,
            loss,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Softmax readout with cross-entropy loss.
    pub fn classifier(n: usize, n_in: usize, n_out: usize, alpha: f64) -> Result<Self> {
        Self::new(n, n_in, n_out, alpha, Readout::Softmax, LossKind::CrossEntropy)
    }

    /// Affine readout with squared-error loss.
    pub fn regressor(n: usize, n_in: usize, n_out: usize, alpha: f64) -> Result<Self> {
        Self::new(n, n_in, n_out, alpha, Readout::Affine, LossKind::MeanSquaredError)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config("alpha must lie in (0, 1]"));
        }
        if self.n == 0 || self.n_out == 0 {
            return Err(Error::Config("n and n_out must be positive"));
        }
        Ok(())
    }

    /// Width of `â = concat(a, x, 1)`.
    #[inline]
    pub fn m(&self) -> usize {
        self.n + self.n_in + 1
    }

    /// Width of `concat(a, 1)` seen by the readout.
    #[inline]
    pub fn m_out(&self) -> usize {
        self.n + 1
    }

    /// Number of recurrent parameters `P = n·m`.
    #[inline]
    pub fn n_params(&self) -> usize {
        self.n * self.m()
    }
}

/// How the recurrent block of `W` is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecurrentInit {
    /// Haar-random orthogonal (spectral radius 1).
    Orthogonal,
    /// i.i.d. `N(0, 1/n)` entries (standard deviation `1/√n`).
    Gaussian,
    /// `(G + Gᵀ) / (2√2)` with `G` as in `Gaussian`, spectral radius ≈ 1.
    Symmetric,
    /// Diagonal with i.i.d. `N(0, 1)` entries.
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitConfig {
    pub recurrent: RecurrentInit,
    /// Standard deviation of the recurrent bias.
    pub bias_std: f64,
    /// Standard deviation of the output bias.
    pub out_bias_std: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            recurrent: RecurrentInit::Orthogonal,
            bias_std: 0.0,
            out_bias_std: 0.0,
        }
    }
}

impl InitConfig {
    /// Initialization of the untrained target network in the Mimic task.
    pub fn target() -> Self {
        InitConfig {
            bias_std: 0.1,
            out_bias_std: 0.1,
            ..Default::default()
        }
    }
}

/// `W` (`n × m`: recurrent, input, bias columns) and `Wout` (`n_out × (n+1)`).
#[derive(Debug, Clone, PartialEq)]
pub struct RnnParams {
    pub w: Matrix,
    pub w_out: Matrix,
}

impl RnnParams {
    pub fn zeros(cfg: &RnnConfig) -> Self {
        RnnParams {
            w: Matrix::zeros(cfg.n, cfg.m()),
            w_out: Matrix::zeros(cfg.n_out, cfg.m_out()),
        }
    }

    /// Default initialization: orthogonal recurrent weights, input weights
    /// `N(0, 1/n_in)`, output weights `N(0, 1/n)`, zero biases.
    pub fn init<R: Rng + ?Sized>(cfg: &RnnConfig, rng: &mut R) -> Self {
        Self::init_with(cfg, &InitConfig::default(), rng)
    }

    pub fn init_with<R: Rng + ?Sized>(cfg: &RnnConfig, init: &InitConfig, rng: &mut R) -> Self {
        let n = cfg.n;
        let w_rec = recurrent_block(n, init.recurrent, rng);
        let in_std = if cfg.n_in > 0 {
            1.0 / libm::sqrt(cfg.n_in as f64)
        } else {
            0.0
        };
        let w_in = rng::gaussian_matrix(rng, n, cfg.n_in, in_std);
        let b = rng::gaussian_vec(rng, n, init.bias_std);
        let w_out = rng::gaussian_matrix(rng, cfg.n_out, n, 1.0 / libm::sqrt(n as f64));
        let b_out = rng::gaussian_vec(rng, cfg.n_out, init.out_bias_std);

        let w = Matrix::from_fn(n, cfg.m(), |i, j| {
            if j < n {
                w_rec[(i, j)]
            } else if j < n + cfg.n_in {
                w_in[(i, j - n)]
            } else {
                b[i]
            }
        });
        let w_out = Matrix::from_fn(cfg.n_out, n + 1, |i, j| if j < n { w_out[(i, j)] } else { b_out[i] });
        RnnParams { w, w_out }
    }

    pub fn check(&self, cfg: &RnnConfig) -> Result<()> {
        check_len("W rows", cfg.n, self.w.rows())?;
        check_len("W cols", cfg.m(), self.w.cols())?;
        check_len("Wout rows", cfg.n_out, self.w_out.rows())?;
        check_len("Wout cols", cfg.m_out(), self.w_out.cols())?;
        check_finite("W", self.w.as_slice())?;
        check_finite("Wout", self.w_out.as_slice())
    }

    /// The `n × n` recurrent block of `W`.
    pub fn w_rec(&self) -> Matrix {
        self.w.columns(0, self.w.rows())
    }
}

fn recurrent_block<R: Rng + ?Sized>(n: usize, scheme: RecurrentInit, rng: &mut R) -> Matrix {
    let std = 1.0 / libm::sqrt(n as f64);
    match scheme {
        RecurrentInit::Orthogonal => rng::orthogonal(rng, n),
        RecurrentInit::Gaussian => rng::gaussian_matrix(rng, n, n, std),
        RecurrentInit::Symmetric => {
            let g = rng::gaussian_matrix(rng, n, n, std);
            let scale = 1.0 / (2.0 * core::f64::consts::SQRT_2);
            Matrix::from_fn(n, n, |i, j| scale * (g[(i, j)] + g[(j, i)]))
        }
        RecurrentInit::Diagonal => Matrix::diag(&rng::gaussian_vec(rng, n, 1.0)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnnState {
    pub a: Vec<f64>,
}

impl RnnState {
    pub fn zeros(n: usize) -> Self {
        RnnState { a: alloc::vec![0.0; n] }
    }
}

/// Everything about one forward step that a learner may need later.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCache {
    /// `concat(a(t-1), x(t), 1)`, length `m`.
    pub a_hat_prev: Vec<f64>,
    /// Pre-activations `W â(t-1)`.
    pub h: Vec<f64>,
    pub a_new: Vec<f64>,
    /// `φ'(h)`.
    pub phi_prime: Vec<f64>,
}

impl StepCache {
    pub fn a_prev(&self) -> &[f64] {
        &self.a_hat_prev[..self.h.len()]
    }

    pub fn input(&self) -> &[f64] {
        let n = self.h.len();
        &self.a_hat_prev[n..self.a_hat_prev.len() - 1]
    }
}

/// `concat(a, x, 1)`
pub fn augment(a: &[f64], x: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(a.len() + x.len() + 1);
    v.extend_from_slice(a);
    v.extend_from_slice(x);
    v.push(1.0);
    v
}

/// One forward step of the network.
pub fn step(cfg: &RnnConfig, params: &RnnParams, state: &RnnState, x: &[f64]) -> Result<(RnnState, StepCache)> {
    check_len("input x", cfg.n_in, x.len())?;
    check_len("state a", cfg.n, state.a.len())?;
    check_len("W rows", cfg.n, params.w.rows())?;
    check_len("W cols", cfg.m(), params.w.cols())?;

    let a_hat_prev = augment(&state.a, x);
    let h = params.w.mul_vec(&a_hat_prev);
    let alpha = cfg.alpha;
    let phi = cfg.nonlinearity;
    let a_new: Vec<f64> = state
        .a
        .iter()
        .zip(&h)
        .map(|(&a, &hi)| (1.0 - alpha) * a + alpha * phi.apply(hi))
        .collect();
    let phi_prime: Vec<f64> = h.iter().map(|&hi| phi.derivative(hi)).collect();
    check_finite("state after step", &a_new)?;

    let next = RnnState { a: a_new.clone() };
    Ok((
        next,
        StepCache {
            a_hat_prev,
            h,
            a_new,
            phi_prime,
        },
    ))
}

/// Output of the readout layer for state `a`.
pub fn readout(cfg: &RnnConfig, params: &RnnParams, a: &[f64]) -> Vec<f64> {
    let n = cfg.n;
    let z: Vec<f64> = (0..cfg.n_out)
        .map(|k| {
            let row = params.w_out.row(k);
            dot(&row[..n], a) + row[n]
        })
        .collect();
    match cfg.readout {
        Readout::Affine => z,
        Readout::Softmax => softmax(&z),
    }
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| libm::exp(v - max)).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn loss(y: &[f64], y_star: &[f64], kind: LossKind) -> f64 {
    debug_assert_eq!(y.len(), y_star.len());
    match kind {
        LossKind::CrossEntropy => -y
            .iter()
            .zip(y_star)
            .map(|(&p, &t)| t * libm::log(p.max(PROB_FLOOR)))
            .sum::<f64>(),
        LossKind::MeanSquaredError => 0.5 * y.iter().zip(y_star).map(|(p, t)| (p - t) * (p - t)).sum::<f64>(),
    }
}

/// `J = ∂a(t)/∂a(t-1) = (1 - α) I + α diag(φ'(h)) W_rec`
pub fn jacobian(cfg: &RnnConfig, params: &RnnParams, cache: &StepCache) -> Matrix {
    let n = cfg.n;
    let alpha = cfg.alpha;
    Matrix::from_fn(n, n, |k, l| {
        let direct = alpha * cache.phi_prime[k] * params.w[(k, l)];
        if k == l {
            (1.0 - alpha) + direct
        } else {
            direct
        }
    })
}

/// Sparse immediate influence `M̄[k,i,j] = α δ_ki φ'(h_i) â_j`, stored by its
/// two factors.
#[derive(Debug, Clone, PartialEq)]
pub struct ImmediateInfluence {
    pub phi_prime: Vec<f64>,
    pub a_hat: Vec<f64>,
    pub alpha: f64,
}

impl ImmediateInfluence {
    pub fn from_cache(cache: &StepCache, alpha: f64) -> Self {
        ImmediateInfluence {
            phi_prime: cache.phi_prime.clone(),
            a_hat: cache.a_hat_prev.clone(),
            alpha,
        }
    }

    pub fn n(&self) -> usize {
        self.phi_prime.len()
    }

    pub fn m(&self) -> usize {
        self.a_hat.len()
    }

    /// Diagonal `D_ii = α φ'(h_i)`.
    pub fn diag(&self) -> Vec<f64> {
        self.phi_prime.iter().map(|p| self.alpha * p).collect()
    }

    /// Dense `n × (n·m)` form, column index `i·m + j`.
    pub fn densify(&self) -> Matrix {
        let (n, m) = (self.n(), self.m());
        let mut out = Matrix::zeros(n, n * m);
        let d = self.diag();
        for i in 0..n {
            let row = out.row_mut(i);
            for j in 0..m {
                row[i * m + j] = d[i] * self.a_hat[j];
            }
        }
        out
    }

    /// `Σ_k u_k M̄[k,i,j]` rolled into an `n × m` matrix: `(u ⊙ D) âᵀ`.
    pub fn contract(&self, u: &[f64]) -> Matrix {
        let du: Vec<f64> = self.diag().iter().zip(u).map(|(d, ui)| d * ui).collect();
        Matrix::outer(&du, &self.a_hat)
    }

    /// `‖M̄‖_F`
    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.diag()) * crate::linalg::norm(&self.a_hat)
    }
}

pub fn immediate_influence(cache: &StepCache, alpha: f64) -> ImmediateInfluence {
    ImmediateInfluence::from_cache(cache, alpha)
}

/// `c̄ = ∂L(t)/∂a(t) = Wout[:, :n]ᵀ (y - y*)`.
///
/// This is exact for softmax + cross-entropy (when `y*` sums to one) and for
/// affine + squared error.
pub fn immediate_credit(cfg: &RnnConfig, params: &RnnParams, y: &[f64], y_star: &[f64]) -> Vec<f64> {
    let n = cfg.n;
    let mut c = alloc::vec![0.0; n];
    for k in 0..cfg.n_out {
        let e = y[k] - y_star[k];
        if e != 0.0 {
            crate::linalg::axpy(e, &params.w_out.row(k)[..n], &mut c);
        }
    }
    c
}

/// `∂L(t)/∂Wout = (y - y*) concat(a, 1)ᵀ`
pub fn output_gradient(y: &[f64], y_star: &[f64], a: &[f64]) -> Matrix {
    let e: Vec<f64> = y.iter().zip(y_star).map(|(p, t)| p - t).collect();
    let mut a1 = Vec::with_capacity(a.len() + 1);
    a1.extend_from_slice(a);
    a1.push(1.0);
    Matrix::outer(&e, &a1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub dw: Matrix,
    pub dw_out: Matrix,
}

impl Gradient {
    pub fn zeros(cfg: &RnnConfig) -> Self {
        Gradient {
            dw: Matrix::zeros(cfg.n, cfg.m()),
            dw_out: Matrix::zeros(cfg.n_out, cfg.m_out()),
        }
    }
}

/// Plain SGD on both weight matrices. Rejects non-finite gradients; there is
/// no clipping.
pub fn apply_sgd(params: &mut RnnParams, grad: &Gradient, lr: f64) -> Result<()> {
    sgd_w(params, &grad.dw, lr)?;
    sgd_out(params, &grad.dw_out, lr)
}

pub fn sgd_w(params: &mut RnnParams, dw: &Matrix, lr: f64) -> Result<()> {
    check_len("dW rows", params.w.rows(), dw.rows())?;
    check_len("dW cols", params.w.cols(), dw.cols())?;
    check_finite("dW", dw.as_slice())?;
    params.w.add_scaled(-lr, dw);
    Ok(())
}

pub fn sgd_out(params: &mut RnnParams, dw_out: &Matrix, lr: f64) -> Result<()> {
    check_len("dWout rows", params.w_out.rows(), dw_out.rows())?;
    check_len("dWout cols", params.w_out.cols(), dw_out.cols())?;
    check_finite("dWout", dw_out.as_slice())?;
    params.w_out.add_scaled(-lr, dw_out);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use alloc::vec;
    use proptest::prelude::*;

    fn random_net(n: usize, n_in: usize, n_out: usize, alpha: f64, seed: u64) -> (RnnConfig, RnnParams) {
        let cfg = RnnConfig::classifier(n, n_in, n_out, alpha).unwrap();
        let mut rng = stream(seed, Stream::Weights);
        let mut p = RnnParams::init(&cfg, &mut rng);
        // non-zero biases so every column is exercised
        for i in 0..n {
            p.w[(i, cfg.m() - 1)] = 0.1 * (i as f64 + 1.0);
        }
        for k in 0..n_out {
            p.w_out[(k, n)] = -0.2 * k as f64;
        }
        (cfg, p)
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
        diff / scale.max(1e-300)
    }

    // Independent central differences of an arbitrary scalar/vector function.
    fn central_diff(f: impl Fn(f64) -> Vec<f64>, eps: f64) -> Vec<f64> {
        let up = f(eps);
        let down = f(-eps);
        up.iter().zip(&down).map(|(u, d)| (u - d) / (2.0 * eps)).collect()
    }

    #[test]
    fn zero_weights_give_zero_state_at_alpha_one() {
        let cfg = RnnConfig::classifier(3, 2, 2, 1.0).unwrap();
        let p = RnnParams::zeros(&cfg);
        let s = RnnState { a: vec![0.3, -0.9, 0.5] };
        let (next, cache) = step(&cfg, &p, &s, &[1.0, 0.0]).unwrap();
        assert_eq!(next.a, vec![0.0; 3]);
        assert_eq!(cache.a_hat_prev[cfg.m() - 1], 1.0);
    }

    #[test]
    fn zero_weights_pure_decay() {
        let cfg = RnnConfig::classifier(2, 1, 2, 0.5).unwrap();
        let p = RnnParams::zeros(&cfg);
        let s = RnnState { a: vec![0.4, -0.2] };
        let (next, _) = step(&cfg, &p, &s, &[1.0]).unwrap();
        assert_eq!(next.a, vec![0.2, -0.1]);
    }

    #[test]
    fn step_matches_scalar_unrolled_formula() {
        let (cfg, p) = random_net(2, 2, 2, 0.7, 3);
        let a = [0.25, -0.6];
        let x = [1.0, 0.0];
        let (next, _) = step(&cfg, &p, &RnnState { a: a.to_vec() }, &x).unwrap();
        let w = |i: usize, j: usize| p.w[(i, j)];
        for i in 0..2 {
            let h = w(i, 0) * a[0] + w(i, 1) * a[1] + w(i, 2) * x[0] + w(i, 3) * x[1] + w(i, 4);
            let expected = (1.0 - 0.7) * a[i] + 0.7 * h.tanh();
            assert!((next.a[i] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn step_rejects_wrong_input_width() {
        let cfg = RnnConfig::classifier(2, 2, 2, 1.0).unwrap();
        let p = RnnParams::zeros(&cfg);
        let err = step(&cfg, &p, &RnnState::zeros(2), &[1.0]).unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
    }

    #[test]
    fn step_rejects_non_finite_state() {
        let cfg = RnnConfig::classifier(1, 1, 1, 0.5).unwrap();
        let p = RnnParams::zeros(&cfg);
        let err = step(&cfg, &p, &RnnState { a: vec![f64::NAN] }, &[0.0]).unwrap_err();
        assert_eq!(err, Error::NonFinite("state after step"));
    }

    #[test]
    fn config_rejects_bad_alpha() {
        assert!(RnnConfig::classifier(2, 1, 1, 0.0).is_err());
        assert!(RnnConfig::classifier(2, 1, 1, 1.5).is_err());
    }

    #[test]
    fn alpha_one_ignores_decay_term() {
        let (cfg, p) = random_net(3, 2, 2, 1.0, 11);
        let s = RnnState { a: vec![0.1, 0.2, -0.3] };
        let (next, cache) = step(&cfg, &p, &s, &[0.0, 1.0]).unwrap();
        let direct: Vec<f64> = cache.h.iter().map(|h| h.tanh()).collect();
        assert_eq!(next.a, direct);
    }

    #[test]
    fn softmax_readout_of_zero_weights_is_uniform() {
        let cfg = RnnConfig::classifier(3, 1, 2, 1.0).unwrap();
        let p = RnnParams::zeros(&cfg);
        assert_eq!(readout(&cfg, &p, &[0.3, 0.1, -0.2]), vec![0.5, 0.5]);
        let aff = RnnConfig::regressor(3, 1, 2, 1.0).unwrap();
        assert_eq!(readout(&aff, &RnnParams::zeros(&aff), &[0.3, 0.1, -0.2]), vec![0.0, 0.0]);
    }

    #[test]
    fn softmax_survives_large_logits() {
        let y = softmax(&[1000.0, -1000.0, 999.0]);
        assert!(y.iter().all(|v| v.is_finite()));
        assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_of_uniform_guess() {
        let l = loss(&[0.5, 0.5], &[1.0, 0.0], LossKind::CrossEntropy);
        assert!((l - core::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(loss(&[0.2, 0.7], &[0.2, 0.7], LossKind::MeanSquaredError), 0.0);
        // clamped log
        let l0 = loss(&[0.0, 1.0], &[1.0, 0.0], LossKind::CrossEntropy);
        assert!((l0 + (1e-12f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn losses_match_scalar_evaluation() {
        let y = [0.2, 0.3, 0.5];
        let t = [0.1, 0.6, 0.3];
        let ce = -(0.1 * 0.2f64.ln() + 0.6 * 0.3f64.ln() + 0.3 * 0.5f64.ln());
        let mse = 0.5 * (0.1f64.powi(2) + 0.3f64.powi(2) + 0.2f64.powi(2));
        assert!((loss(&y, &t, LossKind::CrossEntropy) - ce).abs() < 1e-15);
        assert!((loss(&y, &t, LossKind::MeanSquaredError) - mse).abs() < 1e-15);
    }

    #[test]
    fn jacobian_special_cases() {
        let cfg = RnnConfig::classifier(2, 1, 1, 0.3).unwrap();
        let mut p = RnnParams::zeros(&cfg);
        p.w[(0, 2)] = 0.5; // input weight only
        let (_, cache) = step(&cfg, &p, &RnnState { a: vec![0.1, 0.2] }, &[1.0]).unwrap();
        let j = jacobian(&cfg, &p, &cache);
        assert_eq!(j, Matrix::identity(2).scaled(0.7));

        let cfg1 = RnnConfig::classifier(2, 1, 1, 1.0).unwrap();
        let mut p1 = RnnParams::zeros(&cfg1);
        p1.w[(0, 1)] = 0.4;
        p1.w[(1, 0)] = -0.3;
        // a = 0 and no input: h = 0, tanh'(0) = 1
        let (_, cache1) = step(&cfg1, &p1, &RnnState::zeros(2), &[0.0]).unwrap();
        assert_eq!(jacobian(&cfg1, &p1, &cache1), p1.w_rec());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for (seed, alpha) in [(1u64, 1.0), (2, 0.5), (3, 0.25)] {
            let (cfg, p) = random_net(5, 3, 2, alpha, seed);
            let a0 = vec![0.3, -0.2, 0.5, 0.05, -0.7];
            let x = [1.0, 0.0, 1.0];
            let (_, cache) = step(&cfg, &p, &RnnState { a: a0.clone() }, &x).unwrap();
            let j = jacobian(&cfg, &p, &cache);
            for l in 0..cfg.n {
                let col = central_diff(
                    |e| {
                        let mut a = a0.clone();
                        a[l] += e;
                        step(&cfg, &p, &RnnState { a }, &x).unwrap().0.a
                    },
                    1e-6,
                );
                let exact = j.column(l);
                assert!(rel_err(&exact, &col) < 1e-6, "column {l}: {exact:?} vs {col:?}");
            }
        }
    }

    #[test]
    fn immediate_influence_single_unit() {
        let cfg = RnnConfig::classifier(1, 0, 1, 1.0).unwrap();
        let p = RnnParams::zeros(&cfg);
        let (_, cache) = step(&cfg, &p, &RnnState { a: vec![0.5] }, &[]).unwrap();
        let mbar = immediate_influence(&cache, 1.0);
        assert_eq!(mbar.densify().as_slice(), &[0.5, 1.0]);
    }

    #[test]
    fn immediate_influence_matches_finite_differences() {
        let (cfg, p) = random_net(4, 2, 2, 0.6, 5);
        let a0 = vec![0.3, -0.2, 0.5, 0.05];
        let x = [0.0, 1.0];
        let (_, cache) = step(&cfg, &p, &RnnState { a: a0.clone() }, &x).unwrap();
        let dense = immediate_influence(&cache, cfg.alpha).densify();
        let m = cfg.m();
        for i in 0..cfg.n {
            for j in 0..m {
                let col = central_diff(
                    |e| {
                        let mut q = p.clone();
                        q.w[(i, j)] += e;
                        step(&cfg, &q, &RnnState { a: a0.clone() }, &x).unwrap().0.a
                    },
                    1e-6,
                );
                let exact = dense.column(i * m + j);
                assert!(rel_err(&exact, &col) < 1e-6);
                for (k, v) in exact.iter().enumerate() {
                    if k != i {
                        assert_eq!(*v, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn immediate_credit_matches_finite_differences() {
        for regression in [false, true] {
            let (mut cfg, p) = random_net(4, 2, 3, 1.0, 9);
            if regression {
                cfg.readout = Readout::Affine;
                cfg.loss = LossKind::MeanSquaredError;
            }
            let a = vec![0.3, -0.2, 0.5, 0.05];
            let y_star = [0.2, 0.5, 0.3];
            let y = readout(&cfg, &p, &a);
            let c = immediate_credit(&cfg, &p, &y, &y_star);
            let fd: Vec<f64> = (0..cfg.n)
                .map(|k| {
                    central_diff(
                        |e| {
                            let mut a2 = a.clone();
                            a2[k] += e;
                            vec![loss(&readout(&cfg, &p, &a2), &y_star, cfg.loss)]
                        },
                        1e-6,
                    )[0]
                })
                .collect();
            assert!(rel_err(&c, &fd) < 1e-6, "{c:?} vs {fd:?}");
        }
    }

    #[test]
    fn immediate_credit_zero_cases() {
        let (cfg, p) = random_net(3, 1, 2, 1.0, 2);
        assert_eq!(immediate_credit(&cfg, &p, &[0.3, 0.7], &[0.3, 0.7]), vec![0.0; 3]);
        let z = RnnParams::zeros(&cfg);
        assert_eq!(immediate_credit(&cfg, &z, &[0.9, 0.1], &[0.3, 0.7]), vec![0.0; 3]);
    }

    #[test]
    fn output_gradient_cases() {
        assert_eq!(output_gradient(&[0.4, 0.6], &[0.4, 0.6], &[0.1, 0.2]), Matrix::zeros(2, 3));
        let g = output_gradient(&[0.9, 0.1], &[0.5, 0.5], &[0.0, 0.0]);
        for k in 0..2 {
            assert_eq!(g[(k, 0)], 0.0);
            assert_eq!(g[(k, 1)], 0.0);
            assert!(g[(k, 2)] != 0.0);
        }
    }

    #[test]
    fn output_gradient_matches_finite_differences() {
        let (cfg, p) = random_net(3, 1, 2, 1.0, 4);
        let a = vec![0.3, -0.6, 0.1];
        let y_star = [0.25, 0.75];
        let y = readout(&cfg, &p, &a);
        let g = output_gradient(&y, &y_star, &a);
        for k in 0..cfg.n_out {
            for j in 0..cfg.m_out() {
                let fd = central_diff(
                    |e| {
                        let mut q = p.clone();
                        q.w_out[(k, j)] += e;
                        vec![loss(&readout(&cfg, &q, &a), &y_star, cfg.loss)]
                    },
                    1e-6,
                )[0];
                assert!((g[(k, j)] - fd).abs() <= 1e-6 * fd.abs().max(1e-3));
            }
        }
    }

    #[test]
    fn sgd_updates() {
        let cfg = RnnConfig::classifier(1, 1, 1, 1.0).unwrap();
        let mut p = RnnParams::zeros(&cfg);
        p.w[(0, 0)] = 1.0;
        let before = p.clone();
        apply_sgd(&mut p, &Gradient::zeros(&cfg), 0.1).unwrap();
        assert_eq!(p, before);

        let mut g = Gradient::zeros(&cfg);
        g.dw[(0, 0)] = 2.0;
        apply_sgd(&mut p, &g, 0.0).unwrap();
        assert_eq!(p, before);
        apply_sgd(&mut p, &g, 0.25).unwrap();
        assert_eq!(p.w[(0, 0)], 0.5);

        g.dw_out[(0, 1)] = f64::INFINITY;
        assert!(apply_sgd(&mut p, &g, 0.1).is_err());
    }

    #[test]
    fn init_shapes_and_orthogonal_recurrence() {
        let cfg = RnnConfig::classifier(8, 2, 2, 1.0).unwrap();
        let p = RnnParams::init(&cfg, &mut stream(0, Stream::Weights));
        p.check(&cfg).unwrap();
        let w = p.w_rec();
        let gram = w.transpose().matmul(&w);
        assert!((0..8).all(|i| (gram[(i, i)] - 1.0).abs() < 1e-12));
        assert!((0..8).all(|i| p.w[(i, cfg.m() - 1)] == 0.0));
    }

    proptest! {
        #[test]
        fn softmax_is_a_probability_vector(z in proptest::collection::vec(-50.0f64..50.0, 1..8)) {
            let y = softmax(&z);
            prop_assert!(y.iter().all(|&v| v >= 0.0));
            prop_assert!((y.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn step_is_deterministic_and_tanh_bounded(seed in 0u64..500, a0 in -3.0f64..3.0) {
            let (cfg, p) = random_net(4, 2, 2, 1.0, seed);
            let s = RnnState { a: vec![a0; 4] };
            let (x1, c1) = step(&cfg, &p, &s, &[1.0, 0.0]).unwrap();
            let (x2, c2) = step(&cfg, &p, &s, &[1.0, 0.0]).unwrap();
            prop_assert_eq!(&x1, &x2);
            prop_assert_eq!(c1, c2);
            prop_assert!(x1.a.iter().all(|v| v.abs() <= 1.0));
        }
    }
}
