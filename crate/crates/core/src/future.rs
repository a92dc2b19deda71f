//! Decoupled neural interfaces: a linear synthetic-gradient model predicts the
//! future-facing credit `c(t)` from `ã = concat(a, y*, 1)` and is trained by
//! bootstrapping against its own prediction one step later.

use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::learner::{Learner, StepContext};
use crate::linalg::{axpy, Matrix};
use crate::rng::{self, Stream};
use crate::rnn::{ImmediateInfluence, Nonlinearity, RnnConfig, RnnParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DniConfig {
    pub sg_lr: f64,
    pub jhat_lr: f64,
    /// Steps between refreshes of the frozen copy `A*`.
    pub tau: usize,
    /// Apply the bio-plausible substitutions: random feedback, squashed
    /// bootstrap, learned Jacobian.
    pub bio: bool,
}

impl Default for DniConfig {
    fn default() -> Self {
        DniConfig {
            sg_lr: 1e-3,
            jhat_lr: 1e-3,
            tau: 5,
            bio: false,
        }
    }
}

impl DniConfig {
    pub fn bio() -> Self {
        DniConfig {
            bio: true,
            ..Self::default()
        }
    }
}

/// Synthetic-gradient weights `A` (`m' × n`) and the frozen target copy `A*`.
#[derive(Debug, Clone, PartialEq)]
pub struct SgParams {
    pub a: Matrix,
    pub a_star: Matrix,
    pub tau: usize,
    pub lr: f64,
    updates: usize,
}

impl SgParams {
    pub fn new(a: Matrix, tau: usize, lr: f64) -> Result<Self> {
        if tau == 0 {
            return Err(Error::Config("target refresh period must be at least 1"));
        }
        Ok(SgParams {
            a_star: a.clone(),
            a,
            tau,
            lr,
            updates: 0,
        })
    }

    /// `A ~ N(0, 1/√n)` for `n` units and `n_out` outputs.
    pub fn init<R: rand::Rng + ?Sized>(n: usize, n_out: usize, tau: usize, lr: f64, rng: &mut R) -> Result<Self> {
        let a = rng::gaussian_matrix(rng, n + n_out + 1, n, 1.0 / libm::sqrt(n as f64));
        Self::new(a, tau, lr)
    }

    pub fn n(&self) -> usize {
        self.a.cols()
    }
}

/// `ã = concat(a, y*, 1)`
pub fn sg_features(a: &[f64], y_star: &[f64]) -> Vec<f64> {
    crate::rnn::augment(a, y_star)
}

/// Predicted credit `ãᵀA`.
pub fn sg_predict(sg: &SgParams, a: &[f64], y_star: &[f64]) -> Vec<f64> {
    sg.a.vec_mul(&sg_features(a, y_star))
}

/// `c̄(t) + (ã(t+1)ᵀ A*) J(t+1)`, optionally squashing the bootstrapped
/// estimate through `φ` first.
pub fn bootstrap_target(
    sg: &SgParams,
    features_next: &[f64],
    credit: &[f64],
    jacobian_next: &Matrix,
    squash: Option<Nonlinearity>,
) -> Vec<f64> {
    let mut future = sg.a_star.vec_mul(features_next);
    if let Some(phi) = squash {
        future.iter_mut().for_each(|c| *c = phi.apply(*c));
    }
    let mut target = jacobian_next.vec_mul(&future);
    axpy(1.0, credit, &mut target);
    target
}

/// One SGD step on `½‖ã(t)ᵀA - target‖²`, then a refresh of `A*` every `τ`
/// updates.
pub fn sg_step_toward(sg: &mut SgParams, features: &[f64], target: &[f64]) -> Result<()> {
    check_len("SG features", sg.a.rows(), features.len())?;
    check_len("SG target", sg.n(), target.len())?;
    let mut residual = sg.a.vec_mul(features);
    axpy(-1.0, target, &mut residual);
    sg.a.add_outer(-sg.lr, features, &residual);
    if !sg.a.is_finite() {
        return Err(Error::NonFinite("synthetic-gradient weights"));
    }
    sg.updates += 1;
    if sg.updates.is_multiple_of(sg.tau) {
        sg.a_star = sg.a.clone();
    }
    Ok(())
}

/// Bootstrapped update of the prediction made for step `t`, applied once
/// step `t+1` is known.
pub fn sg_update(
    sg: &mut SgParams,
    features: &[f64],
    features_next: &[f64],
    credit: &[f64],
    jacobian_next: &Matrix,
) -> Result<()> {
    let target = bootstrap_target(sg, features_next, credit, jacobian_next, None);
    sg_step_toward(sg, features, &target)
}

/// `dW_ij = ĉ_i α φ'_i â_j`, the immediate influence contracted with the
/// predicted credit.
pub fn dni_gradient(prediction: &[f64], mbar: &ImmediateInfluence) -> Matrix {
    mbar.contract(prediction)
}

/// Learned Jacobian `𝒥` and fixed random feedback weights `W^fb` (`n × n_out`).
#[derive(Debug, Clone, PartialEq)]
pub struct BioState {
    pub jhat: Matrix,
    pub w_fb: Matrix,
    pub lr: f64,
}

impl BioState {
    /// `𝒥 = W_rec`, `W^fb ~ N(0, 1/√n_out)`.
    pub fn init<R: rand::Rng + ?Sized>(params: &RnnParams, n_out: usize, lr: f64, rng: &mut R) -> Self {
        let w_rec = params.w_rec();
        let n = w_rec.rows();
        BioState {
            jhat: w_rec,
            w_fb: rng::gaussian_matrix(rng, n, n_out, 1.0 / libm::sqrt(n_out as f64)),
            lr,
        }
    }

    /// `W^fb (y - y*)`
    pub fn feedback_credit(&self, error: &[f64]) -> Vec<f64> {
        self.w_fb.mul_vec(error)
    }
}

/// `𝒥 ← 𝒥 - lr (𝒥 a(t-1) - a(t)) a(t-1)ᵀ`
pub fn jhat_perceptron_update(bio: &mut BioState, a_t: &[f64], a_prev: &[f64]) -> Result<()> {
    let n = bio.jhat.rows();
    check_len("perceptron a(t)", n, a_t.len())?;
    check_len("perceptron a(t-1)", n, a_prev.len())?;
    let mut residual = bio.jhat.mul_vec(a_prev);
    axpy(-1.0, a_t, &mut residual);
    bio.jhat.add_outer(-bio.lr, &residual, a_prev);
    if !bio.jhat.is_finite() {
        return Err(Error::NonFinite("learned Jacobian"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
struct Pending {
    features: Vec<f64>,
    credit: Vec<f64>,
}

/// DNI, or DNI(b) when built with [`DniConfig::bio`].
#[derive(Debug, Clone)]
pub struct Dni {
    sg: SgParams,
    bio: Option<BioState>,
    pending: Option<Pending>,
}

impl Dni {
    pub fn new(cfg: &RnnConfig, params: &RnnParams, config: DniConfig, seed: u64) -> Result<Self> {
        let mut init = rng::stream(seed, Stream::LearnerInit);
        let sg = SgParams::init(cfg.n, cfg.n_out, config.tau, config.sg_lr, &mut init)?;
        let bio = config
            .bio
            .then(|| BioState::init(params, cfg.n_out, config.jhat_lr, &mut init));
        Ok(Dni {
            sg,
            bio,
            pending: None,
        })
    }

    pub fn sg(&self) -> &SgParams {
        &self.sg
    }

    pub fn bio(&self) -> Option<&BioState> {
        self.bio.as_ref()
    }
}

impl Learner for Dni {
    fn name(&self) -> &'static str {
        if self.bio.is_some() {
            "dni-b"
        } else {
            "dni"
        }
    }

    fn update(&mut self, ctx: &StepContext<'_>) -> Result<Option<Matrix>> {
        let a_t = &ctx.cache.a_new;
        let features = sg_features(a_t, ctx.target);
        let credit = match &self.bio {
            Some(bio) => bio.feedback_credit(&ctx.error()),
            None => ctx.credit.to_vec(),
        };

        if let Some(prev) = self.pending.take() {
            let target = match &self.bio {
                Some(bio) => bootstrap_target(
                    &self.sg,
                    &features,
                    &prev.credit,
                    &bio.jhat,
                    Some(ctx.config.nonlinearity),
                ),
                None => bootstrap_target(&self.sg, &features, &prev.credit, ctx.jacobian, None),
            };
            sg_step_toward(&mut self.sg, &prev.features, &target)?;
        }
        if let Some(bio) = &mut self.bio {
            jhat_perceptron_update(bio, a_t, ctx.cache.a_prev())?;
        }

        let prediction = self.sg.a.vec_mul(&features);
        let dw = dni_gradient(&prediction, &ctx.influence());
        self.pending = Some(Pending { features, credit });
        Ok(Some(dw))
    }

    fn footprint(&self) -> usize {
        let sg = 2 * self.sg.a.as_slice().len();
        let bio = self
            .bio
            .as_ref()
            .map_or(0, |b| b.jhat.as_slice().len() + b.w_fb.as_slice().len());
        sg + bio
    }

    fn state_norm(&self) -> f64 {
        self.sg.a.frobenius_norm()
    }
}
