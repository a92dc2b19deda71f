//! Verification oracles: finite differences of the total sequence loss and
//! exhaustive or sampled averages of the stochastic influence estimators.

use online_rnn_core::approx::{
    kfrtrl_step, rkf_step, uoro_step, InfluenceEstimate, KronState, RKronState, Rank1State,
};
use online_rnn_core::exact::{EBptt, FBptt, Rtrl};
use online_rnn_core::learner::{Learner, StepData};
use online_rnn_core::linalg::Matrix;
use online_rnn_core::rng::{self, SimRng, Stream};
use online_rnn_core::rnn::{self, ImmediateInfluence, InitConfig, RnnConfig, RnnParams, RnnState};
use online_rnn_core::tasks::{AddConfig, AddStream, Sample};
use serde::Serialize;

use crate::error::Result;

/// `‖a - b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn relative_error(a: &Matrix, b: &Matrix) -> f64 {
    let mut diff = a.clone();
    diff.add_scaled(-1.0, b);
    let scale = a.frobenius_norm().max(b.frobenius_norm());
    if scale == 0.0 {
        0.0
    } else {
        diff.frobenius_norm() / scale
    }
}

/// `Σ_t L(t)` over `samples` from the zero state with frozen parameters.
pub fn total_loss(cfg: &RnnConfig, params: &RnnParams, samples: &[Sample]) -> Result<f64> {
    let mut state = RnnState::zeros(cfg.n);
    let mut total = 0.0;
    for s in samples {
        let (next, _) = rnn::step(cfg, params, &state, &s.x)?;
        total += rnn::loss(&rnn::readout(cfg, params, &next.a), &s.y_star, cfg.loss);
        state = next;
    }
    Ok(total)
}

/// Central differences of [`total_loss`] with respect to every entry of `W`.
pub fn finite_difference_gradient(cfg: &RnnConfig, params: &RnnParams, samples: &[Sample], eps: f64) -> Result<Matrix> {
    let (n, m) = params.w.shape();
    let mut grad = Matrix::zeros(n, m);
    let mut probe = params.clone();
    for i in 0..n {
        for j in 0..m {
            let w = params.w[(i, j)];
            probe.w[(i, j)] = w + eps;
            let up = total_loss(cfg, &probe, samples)?;
            probe.w[(i, j)] = w - eps;
            let down = total_loss(cfg, &probe, samples)?;
            probe.w[(i, j)] = w;
            grad[(i, j)] = (up - down) / (2.0 * eps);
        }
    }
    Ok(grad)
}

/// Sum of every gradient `learner` emits over `samples` with frozen
/// parameters, including whatever it still holds at the end.
pub fn summed_learner_gradient(
    learner: &mut dyn Learner,
    cfg: &RnnConfig,
    params: &RnnParams,
    samples: &[Sample],
) -> Result<Matrix> {
    let mut state = RnnState::zeros(cfg.n);
    let mut total = Matrix::zeros(cfg.n, cfg.m());
    for s in samples {
        let (next, data) = StepData::compute(cfg, params, &state, &s.x, &s.y_star)?;
        if let Some(g) = learner.update(&data.context(cfg, params))? {
            total.add_scaled(1.0, &g);
        }
        state = next;
    }
    if let Some(g) = learner.drain() {
        total.add_scaled(1.0, &g);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub n: usize,
    pub m: usize,
    pub steps: usize,
    pub rtrl_vs_fd: f64,
    pub ebptt_vs_fd: f64,
    pub fbptt_vs_fd: f64,
    pub ebptt_vs_rtrl: f64,
    pub fbptt_vs_rtrl: f64,
    pub fbptt_vs_ebptt: f64,
}

impl GradcheckReport {
    pub const PAIRWISE_TOL: f64 = 1e-8;
    pub const FD_TOL: f64 = 1e-5;

    pub fn max_pairwise(&self) -> f64 {
        self.ebptt_vs_rtrl.max(self.fbptt_vs_rtrl).max(self.fbptt_vs_ebptt)
    }

    pub fn max_vs_fd(&self) -> f64 {
        self.rtrl_vs_fd.max(self.ebptt_vs_fd).max(self.fbptt_vs_fd)
    }

    pub fn passed(&self) -> bool {
        self.max_pairwise() <= Self::PAIRWISE_TOL && self.max_vs_fd() <= Self::FD_TOL
    }
}

/// Random network with `n` units on a `steps`-long Add prefix.
pub fn random_add_problem(n: usize, steps: usize, seed: u64) -> Result<(RnnConfig, RnnParams, Vec<Sample>)> {
    let cfg = RnnConfig::classifier(n, 2, 2, 1.0)?;
    let init = InitConfig {
        bias_std: 0.5,
        out_bias_std: 0.5,
        ..InitConfig::default()
    };
    let params = RnnParams::init_with(&cfg, &init, &mut rng::stream(seed, Stream::Weights));
    let samples = AddStream::new(AddConfig::default(), seed)?.take(steps).collect();
    Ok((cfg, params, samples))
}

/// Compares summed RTRL, full-horizon E-BPTT and full-horizon F-BPTT with
/// each other and with central differences.
pub fn gradcheck(n: usize, steps: usize, seed: u64) -> Result<GradcheckReport> {
    let (cfg, params, samples) = random_add_problem(n, steps, seed)?;
    let horizon = steps.max(1);
    let rtrl = summed_learner_gradient(&mut Rtrl::new(&cfg), &cfg, &params, &samples)?;
    let ebptt = summed_learner_gradient(&mut EBptt::new(horizon)?, &cfg, &params, &samples)?;
    let fbptt = summed_learner_gradient(&mut FBptt::new(horizon)?, &cfg, &params, &samples)?;
    let fd = finite_difference_gradient(&cfg, &params, &samples, 1e-6)?;
    Ok(GradcheckReport {
        n,
        m: cfg.m(),
        steps,
        rtrl_vs_fd: relative_error(&rtrl, &fd),
        ebptt_vs_fd: relative_error(&ebptt, &fd),
        fbptt_vs_fd: relative_error(&fbptt, &fd),
        ebptt_vs_rtrl: relative_error(&ebptt, &rtrl),
        fbptt_vs_rtrl: relative_error(&fbptt, &rtrl),
        fbptt_vs_ebptt: relative_error(&fbptt, &ebptt),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Uoro,
    KfRtrl,
    RKfRtrl,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::Uoro, Estimator::KfRtrl, Estimator::RKfRtrl];

    /// Length of the sign vector `ν` for `n` units.
    pub fn noise_len(self, n: usize) -> usize {
        match self {
            Estimator::KfRtrl => 2,
            Estimator::Uoro | Estimator::RKfRtrl => n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// Every sign pattern once.
    Exhaustive,
    MonteCarlo(usize),
}

/// A fixed prior estimator state together with one step's `J`, `M̄` and `c̄`.
#[derive(Debug, Clone)]
pub struct UnbiasednessProblem {
    pub estimator: Estimator,
    prior: Prior,
    pub jacobian: Matrix,
    pub influence: ImmediateInfluence,
    pub credit: Vec<f64>,
}

#[derive(Debug, Clone)]
enum Prior {
    Rank1(Rank1State),
    Kron(KronState),
    RKron(RKronState),
}

impl Prior {
    fn estimate(&self) -> Matrix {
        match self {
            Prior::Rank1(s) => s.influence_estimate(),
            Prior::Kron(s) => s.influence_estimate(),
            Prior::RKron(s) => s.influence_estimate(),
        }
    }

    /// Post-update influence estimate for one sign pattern.
    fn updated(&self, p: &UnbiasednessProblem, nu: &[f64]) -> Result<Matrix> {
        let (j, mbar, c) = (&p.jacobian, &p.influence, &p.credit);
        Ok(match self {
            Prior::Rank1(s) => {
                let mut s = s.clone();
                uoro_step(&mut s, j, mbar, c, nu)?;
                s.influence_estimate()
            }
            Prior::Kron(s) => {
                let mut s = s.clone();
                kfrtrl_step(&mut s, j, mbar, c, [nu[0], nu[1]])?;
                s.influence_estimate()
            }
            Prior::RKron(s) => {
                let mut s = s.clone();
                rkf_step(&mut s, j, mbar, c, nu)?;
                s.influence_estimate()
            }
        })
    }
}

impl UnbiasednessProblem {
    /// Random network with `n` units and `n_in` inputs, a random state and a
    /// random prior estimator state.
    pub fn random(estimator: Estimator, n: usize, n_in: usize, seed: u64) -> Result<Self> {
        let cfg = RnnConfig::classifier(n, n_in, 2, 0.7)?;
        let init = InitConfig {
            bias_std: 0.3,
            ..InitConfig::default()
        };
        let mut rng = rng::stream(seed, Stream::Analysis);
        let params = RnnParams::init_with(&cfg, &init, &mut rng);
        let state = RnnState {
            a: rng::gaussian_vec(&mut rng, n, 0.5),
        };
        let x = rng::gaussian_vec(&mut rng, n_in, 1.0);
        let (_, cache) = rnn::step(&cfg, &params, &state, &x)?;
        let m = cfg.m();
        let prior = match estimator {
            Estimator::Uoro => Prior::Rank1(Rank1State::init(n, m, &mut rng)),
            Estimator::KfRtrl => Prior::Kron(KronState::init(n, m, &mut rng)),
            Estimator::RKfRtrl => Prior::RKron(RKronState::init(n, m, &mut rng)),
        };
        Ok(UnbiasednessProblem {
            estimator,
            prior,
            jacobian: rnn::jacobian(&cfg, &params, &cache),
            influence: rnn::immediate_influence(&cache, cfg.alpha),
            credit: rng::gaussian_vec(&mut rng, n, 1.0),
        })
    }

    /// `J M_prev + M̄` with `M_prev` the prior state's estimate.
    pub fn exact_update(&self) -> Matrix {
        let mut exact = self.jacobian.matmul(&self.prior.estimate());
        exact.add_scaled(1.0, &self.influence.densify());
        exact
    }

    /// Average post-update estimate over sign patterns.
    pub fn average_update(&self, sampling: Sampling, rng: &mut SimRng) -> Result<Matrix> {
        let len = self.estimator.noise_len(self.influence.n());
        let exact = self.exact_update();
        let mut total = Matrix::zeros(exact.rows(), exact.cols());
        let count = match sampling {
            Sampling::Exhaustive => {
                let patterns = 1usize << len;
                for bits in 0..patterns {
                    let nu: Vec<f64> = (0..len).map(|k| if bits >> k & 1 == 1 { 1.0 } else { -1.0 }).collect();
                    total.add_scaled(1.0, &self.prior.updated(self, &nu)?);
                }
                patterns
            }
            Sampling::MonteCarlo(samples) => {
                for _ in 0..samples {
                    let nu = rng::sign_vec(rng, len);
                    total.add_scaled(1.0, &self.prior.updated(self, &nu)?);
                }
                samples
            }
        };
        total.scale(1.0 / count as f64);
        Ok(total)
    }

    /// Relative Frobenius error of the averaged estimate.
    pub fn error(&self, sampling: Sampling, rng: &mut SimRng) -> Result<f64> {
        Ok(relative_error(&self.average_update(sampling, rng)?, &self.exact_update()))
    }
}

/// Relative error of the sign-averaged estimator update against the exact
/// update from the same prior.
pub fn unbiasedness_check(estimator: Estimator, n: usize, n_in: usize, sampling: Sampling, seed: u64) -> Result<f64> {
    let problem = UnbiasednessProblem::random(estimator, n, n_in, seed)?;
    problem.error(sampling, &mut rng::stream(seed, Stream::LearnerNoise))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_sequence_has_zero_gradient() {
        let (cfg, params, _) = random_add_problem(3, 0, 1).unwrap();
        let g = finite_difference_gradient(&cfg, &params, &[], 1e-6).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn single_step_matches_closed_form() {
        // one step from a = 0: dL/dW = (Woutᵀ(y - y*) ⊙ φ'(h)) âᵀ
        let (cfg, params, samples) = random_add_problem(3, 1, 4).unwrap();
        let fd = finite_difference_gradient(&cfg, &params, &samples, 1e-6).unwrap();
        let (_, data) = StepData::compute(&cfg, &params, &RnnState::zeros(3), &samples[0].x, &samples[0].y_star).unwrap();
        let closed = data.context(&cfg, &params).influence().contract(&data.credit);
        assert!(relative_error(&fd, &closed) < 1e-7);
    }

    #[test]
    fn short_gradcheck_passes() {
        let r = gradcheck(3, 8, 5).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn exhaustive_average_is_exact_for_every_estimator() {
        for est in Estimator::ALL {
            let err = unbiasedness_check(est, 2, 1, Sampling::Exhaustive, 7).unwrap();
            assert!(err < 1e-12, "{est:?}: {err}");
        }
    }

    #[test]
    fn relative_error_is_symmetric_and_zero_on_equal() {
        let a = Matrix::from_vec(1, 2, vec![1.0, 2.0]);
        let b = Matrix::from_vec(1, 2, vec![1.0, 2.5]);
        assert_eq!(relative_error(&a, &a), 0.0);
        assert_eq!(relative_error(&a, &b), relative_error(&b, &a));
    }
}
