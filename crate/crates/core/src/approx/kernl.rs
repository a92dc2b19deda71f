//! Kernel RNN learning: `M[k,i,j] ≈ A_ki B_ij` with learned per-unit
//! timescales `α_i` and a sensitivity matrix `A` fitted online against a
//! noise-perturbed copy of the network.

use alloc::vec::Vec;

use super::rflo::{leaky_trace, row_scaled};
use super::InfluenceEstimate;
use crate::error::{check_len, Error, Result};
use crate::learner::{Learner, StepContext};
use crate::linalg::{norm, Matrix};
use crate::rng::{self, SimRng, Stream};
use crate::rnn::{self, ImmediateInfluence, RnnConfig, RnnParams};

/// Bounds `α_i` is clamped to after every meta step.
pub const ALPHA_MIN: f64 = 1e-3;
pub const ALPHA_MAX: f64 = 1.0 - 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernlConfig {
    pub initial_alpha: f64,
    pub meta_lr: f64,
    /// Standard deviation of the pre-activation perturbation.
    pub sigma: f64,
    /// Divergence threshold on `‖a_pert - a‖`.
    pub reset_threshold: f64,
    pub meta_learning: bool,
}

impl Default for KernlConfig {
    fn default() -> Self {
        KernlConfig {
            initial_alpha: 0.8,
            meta_lr: 5.0,
            sigma: 1e-3,
            reset_threshold: 1.0,
            meta_learning: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernlState {
    /// Sensitivity matrix, `n × n`.
    pub a: Matrix,
    /// Eligibility trace, `n × m`.
    pub b: Matrix,
    pub alpha: Vec<f64>,
    pub a_pert: Vec<f64>,
    pub beta: Vec<f64>,
    pub dbeta_dalpha: Vec<f64>,
}

impl KernlState {
    /// `A = I`, `B = 0`, every `α_i = alpha`.
    pub fn new(n: usize, m: usize, alpha: f64) -> Self {
        KernlState {
            a: Matrix::identity(n),
            b: Matrix::zeros(n, m),
            alpha: alloc::vec![alpha; n],
            a_pert: alloc::vec![0.0; n],
            beta: alloc::vec![0.0; n],
            dbeta_dalpha: alloc::vec![0.0; n],
        }
    }

    fn reset_perturbation(&mut self, a_true: &[f64]) {
        self.a_pert.copy_from_slice(a_true);
        self.beta.iter_mut().for_each(|x| *x = 0.0);
        self.dbeta_dalpha.iter_mut().for_each(|x| *x = 0.0);
    }
}

impl InfluenceEstimate for KernlState {
    fn influence_estimate(&self) -> Matrix {
        let (n, m) = self.b.shape();
        let mut out = Matrix::zeros(n, n * m);
        for k in 0..n {
            let row = out.row_mut(k);
            for i in 0..n {
                let aki = self.a[(k, i)];
                for (j, bij) in self.b.row(i).iter().enumerate() {
                    row[i * m + j] = aki * bij;
                }
            }
        }
        out
    }
}

/// Advances the eligibility trace with the learned timescales and returns
/// `dW_ij = (c̄ A)_i B_ij`.
pub fn kernl_step(state: &mut KernlState, mbar: &ImmediateInfluence, credit: &[f64]) -> Result<Matrix> {
    check_len("KeRNL trace rows", mbar.n(), state.b.rows())?;
    check_len("KeRNL trace cols", mbar.m(), state.b.cols())?;
    let alpha = &state.alpha;
    leaky_trace(&mut state.b, |i| alpha[i], mbar);
    if !state.b.is_finite() {
        return Err(Error::NonFinite("KeRNL trace"));
    }
    let u = state.a.vec_mul(credit);
    Ok(row_scaled(&state.b, &u))
}

/// `∂β_i/∂α_i ← (1 - α_i) ∂β_i/∂α_i - β_i`, then `β_i ← (1 - α_i) β_i + ζ_i`.
pub fn advance_noise_traces(state: &mut KernlState, zeta: &[f64]) {
    for (i, z) in zeta.iter().enumerate() {
        let keep = 1.0 - state.alpha[i];
        let beta_prev = state.beta[i];
        state.dbeta_dalpha[i] = keep * state.dbeta_dalpha[i] - beta_prev;
        state.beta[i] = keep * beta_prev + z;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetaOutcome {
    Updated,
    /// The perturbed copy drifted past the threshold and was re-synchronized.
    Reset,
}

/// One step of the perturbed trajectory followed by SGD on
/// `½‖(a_pert - a) - A β‖²` with respect to `A` and `α`.
///
/// `a_hat_prev` and `a_true` are the true network's `â(t-1)` and `a(t)`;
/// `zeta` is the noise added to the perturbed copy's pre-activations.
pub fn kernl_meta_update(
    state: &mut KernlState,
    cfg: &RnnConfig,
    params: &RnnParams,
    a_hat_prev: &[f64],
    a_true: &[f64],
    zeta: &[f64],
    config: &KernlConfig,
) -> Result<MetaOutcome> {
    let n = cfg.n;
    check_len("KeRNL noise", n, zeta.len())?;
    check_len("KeRNL true state", n, a_true.len())?;

    let x = &a_hat_prev[n..a_hat_prev.len() - 1];
    let pert_hat = rnn::augment(&state.a_pert, x);
    let h = params.w.mul_vec(&pert_hat);
    for i in 0..n {
        let drive = cfg.nonlinearity.apply(h[i] + zeta[i]);
        state.a_pert[i] = (1.0 - cfg.alpha) * state.a_pert[i] + cfg.alpha * drive;
    }
    advance_noise_traces(state, zeta);

    let diff: Vec<f64> = state.a_pert.iter().zip(a_true).map(|(p, t)| p - t).collect();
    let drift = norm(&diff);
    if drift.is_nan() || drift > config.reset_threshold {
        state.reset_perturbation(a_true);
        return Ok(MetaOutcome::Reset);
    }
    let predicted = state.a.mul_vec(&state.beta);
    let e: Vec<f64> = diff.iter().zip(&predicted).map(|(d, p)| d - p).collect();

    // Both gradients are taken at the pre-update A.
    let ea = state.a.vec_mul(&e);
    for ((alpha, g), dbeta) in state.alpha.iter_mut().zip(&ea).zip(&state.dbeta_dalpha) {
        let step = config.meta_lr * g * dbeta / (1.0 - *alpha);
        *alpha = (*alpha + step).clamp(ALPHA_MIN, ALPHA_MAX);
    }
    state.a.add_outer(config.meta_lr, &e, &state.beta);

    if !(state.a.is_finite() && state.alpha.iter().all(|x| x.is_finite())) {
        return Err(Error::NonFinite("KeRNL meta parameters"));
    }
    Ok(MetaOutcome::Updated)
}

#[derive(Debug, Clone)]
pub struct Kernl {
    state: KernlState,
    config: KernlConfig,
    noise: SimRng,
    resets: usize,
}

impl Kernl {
    pub fn new(cfg: &RnnConfig, config: KernlConfig, seed: u64) -> Result<Self> {
        if !(config.initial_alpha > 0.0 && config.initial_alpha < 1.0) && config.meta_learning {
            return Err(Error::Config("KeRNL timescales must lie in (0, 1)"));
        }
        if !(config.sigma >= 0.0 && config.meta_lr.is_finite()) {
            return Err(Error::Config("KeRNL noise scale and learning rate must be finite"));
        }
        Ok(Kernl {
            state: KernlState::new(cfg.n, cfg.m(), config.initial_alpha),
            config,
            noise: rng::stream(seed, Stream::LearnerNoise),
            resets: 0,
        })
    }

    /// Fixed `A = I` and `α_i = α`, no meta-learning.
    pub fn frozen(cfg: &RnnConfig) -> Self {
        let config = KernlConfig {
            initial_alpha: cfg.alpha,
            meta_learning: false,
            ..KernlConfig::default()
        };
        Kernl {
            state: KernlState::new(cfg.n, cfg.m(), cfg.alpha),
            config,
            noise: rng::stream(0, Stream::LearnerNoise),
            resets: 0,
        }
    }

    pub fn state(&self) -> &KernlState {
        &self.state
    }

    /// Number of perturbed-trajectory resets so far.
    pub fn resets(&self) -> usize {
        self.resets
    }
}

impl Learner for Kernl {
    fn name(&self) -> &'static str {
        "kernl"
    }

    fn update(&mut self, ctx: &StepContext<'_>) -> Result<Option<Matrix>> {
        let dw = kernl_step(&mut self.state, &ctx.influence(), ctx.credit)?;
        if self.config.meta_learning {
            let zeta = rng::gaussian_vec(&mut self.noise, ctx.config.n, self.config.sigma);
            let outcome = kernl_meta_update(
                &mut self.state,
                ctx.config,
                ctx.params,
                &ctx.cache.a_hat_prev,
                &ctx.cache.a_new,
                &zeta,
                &self.config,
            )?;
            if outcome == MetaOutcome::Reset {
                self.resets += 1;
            }
        }
        Ok(Some(dw))
    }

    fn footprint(&self) -> usize {
        let s = &self.state;
        s.a.as_slice().len() + s.b.as_slice().len() + s.alpha.len() + s.a_pert.len() + s.beta.len() + s.dbeta_dalpha.len()
    }

    fn state_norm(&self) -> f64 {
        self.state.b.frobenius_norm() * self.state.a.frobenius_norm()
    }
}
