//! The per-step interface shared by every learning algorithm.

use alloc::vec::Vec;

use crate::error::Result;
use crate::linalg::Matrix;
use crate::rnn::{self, ImmediateInfluence, RnnConfig, RnnParams, StepCache};

/// Quantities from the step that just ran. A learner sees nothing older than
/// this and whatever it chose to keep in its own state.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub config: &'a RnnConfig,
    /// Parameters the step was computed with.
    pub params: &'a RnnParams,
    pub cache: &'a StepCache,
    pub jacobian: &'a Matrix,
    /// Immediate credit `c̄(t)` computed with the exact output weights.
    pub credit: &'a [f64],
    pub output: &'a [f64],
    pub target: &'a [f64],
}

impl<'a> StepContext<'a> {
    pub fn influence(&self) -> ImmediateInfluence {
        rnn::immediate_influence(self.cache, self.config.alpha)
    }

    /// Output error `y - y*`.
    pub fn error(&self) -> Vec<f64> {
        self.output.iter().zip(self.target).map(|(y, t)| y - t).collect()
    }
}

/// Bundles the forward step with the derived quantities so callers do not
/// have to recompute them per learner.
#[derive(Debug, Clone)]
pub struct StepData {
    pub cache: StepCache,
    pub jacobian: Matrix,
    pub credit: Vec<f64>,
    pub output: Vec<f64>,
    pub target: Vec<f64>,
    pub loss: f64,
}

impl StepData {
    pub fn compute(
        cfg: &RnnConfig,
        params: &RnnParams,
        state: &rnn::RnnState,
        x: &[f64],
        y_star: &[f64],
    ) -> Result<(rnn::RnnState, StepData)> {
        let (next, cache) = rnn::step(cfg, params, state, x)?;
        let output = rnn::readout(cfg, params, &next.a);
        let loss = rnn::loss(&output, y_star, cfg.loss);
        let jacobian = rnn::jacobian(cfg, params, &cache);
        let credit = rnn::immediate_credit(cfg, params, &output, y_star);
        Ok((
            next,
            StepData {
                cache,
                jacobian,
                credit,
                output,
                target: y_star.to_vec(),
                loss,
            },
        ))
    }

    pub fn context<'a>(&'a self, config: &'a RnnConfig, params: &'a RnnParams) -> StepContext<'a> {
        StepContext {
            config,
            params,
            cache: &self.cache,
            jacobian: &self.jacobian,
            credit: &self.credit,
            output: &self.output,
            target: &self.target,
        }
    }
}

pub trait Learner {
    fn name(&self) -> &'static str;

    /// Advances internal state by one network step and optionally emits a
    /// gradient for `W` (`n × m`).
    fn update(&mut self, ctx: &StepContext<'_>) -> Result<Option<Matrix>>;

    /// How many steps after a parameter application its gradient is emitted.
    fn delay(&self) -> usize {
        0
    }

    /// Emits whatever partial gradient is still buffered (end of a sequence).
    fn drain(&mut self) -> Option<Matrix> {
        None
    }

    /// Number of floats held in learner state.
    fn footprint(&self) -> usize;

    /// Frobenius norm of the learner's main state, for divergence reports.
    fn state_norm(&self) -> f64;
}

/// Baseline that never trains `W`.
#[derive(Debug, Default, Clone)]
pub struct FixedW;

impl Learner for FixedW {
    fn name(&self) -> &'static str {
        "fixed-w"
    }

    fn update(&mut self, _ctx: &StepContext<'_>) -> Result<Option<Matrix>> {
        Ok(None)
    }

    fn footprint(&self) -> usize {
        0
    }

    fn state_norm(&self) -> f64 {
        0.0
    }
}
