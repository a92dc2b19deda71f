//! End-to-end online training: one network step, one learner update and one
//! SGD step per sample.

use std::time::{Duration, Instant};

use online_rnn_core::approx::{KfRtrl, Kernl, KernlConfig, Rflo, RkfRtrl, Uoro};
use online_rnn_core::exact::{EBptt, FBptt, Rtrl};
use online_rnn_core::future::{Dni, DniConfig};
use online_rnn_core::learner::{FixedW, Learner, StepData};
use online_rnn_core::rng::{self, Stream};
use online_rnn_core::rnn::{self, RnnConfig, RnnParams, RnnState};
use online_rnn_core::tasks::{AddConfig, AddStream, MimicConfig, MimicStream, Sample, TaskStream};
use online_rnn_core::Error as CoreError;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Algorithm, RunConfig, TaskKind};
use crate::error::{HarnessError, Result};
use crate::smooth::smooth_loss;

/// Width of the Mimic task's input and output.
pub const MIMIC_WIDTH: usize = 32;

pub fn network_config(run: &RunConfig) -> Result<RnnConfig> {
    let cfg = match run.task {
        TaskKind::Add => RnnConfig::classifier(run.n, 2, 2, run.alpha)?,
        TaskKind::Mimic => RnnConfig::regressor(run.n, MIMIC_WIDTH, MIMIC_WIDTH, run.alpha)?,
    };
    Ok(cfg)
}

pub fn task_stream(run: &RunConfig) -> Result<TaskStream> {
    Ok(match run.task {
        TaskKind::Add => TaskStream::Add(AddStream::new(AddConfig::for_alpha(run.alpha), run.seed)?),
        TaskKind::Mimic => TaskStream::Mimic(MimicStream::new(MimicConfig::for_alpha(run.alpha, run.seed)?, run.seed)?),
    })
}

/// Distinct learner seeds keep the noise of co-running stochastic learners
/// independent.
pub fn learner_seed(seed: u64, alg: Algorithm) -> u64 {
    seed ^ ((alg as u64 + 1) << 40)
}

pub fn build_learner(run: &RunConfig, cfg: &RnnConfig, params: &RnnParams, alg: Algorithm) -> Result<Box<dyn Learner>> {
    let seed = learner_seed(run.seed, alg);
    let dni = |bio: bool| DniConfig {
        sg_lr: run.dni_lr(),
        jhat_lr: run.dni_jhat_lr(),
        tau: run.dni_tau,
        bio,
    };
    let learner: Box<dyn Learner> = match alg {
        Algorithm::Rtrl => Box::new(Rtrl::new(cfg)),
        Algorithm::Uoro => Box::new(Uoro::new(cfg, seed)),
        Algorithm::KfRtrl => Box::new(KfRtrl::new(cfg, seed)),
        Algorithm::RKfRtrl => Box::new(RkfRtrl::new(cfg, seed)),
        Algorithm::Kernl => Box::new(Kernl::new(
            cfg,
            KernlConfig {
                initial_alpha: run.kernl_initial_alpha,
                meta_lr: run.kernl_meta_lr,
                sigma: run.kernl_sigma,
                meta_learning: run.kernl_meta_learning,
                ..KernlConfig::default()
            },
            seed,
        )?),
        Algorithm::Rflo => Box::new(Rflo::new(cfg)),
        Algorithm::Dni => Box::new(Dni::new(cfg, params, dni(false), seed)?),
        Algorithm::DniB => Box::new(Dni::new(cfg, params, dni(true), seed)?),
        Algorithm::EBptt => Box::new(EBptt::new(run.truncation)?),
        Algorithm::FBptt => Box::new(FBptt::new(run.truncation)?),
        Algorithm::FixedW => Box::new(FixedW),
    };
    Ok(learner)
}

/// Network, parameters and task stream for one run.
pub struct Simulation {
    pub cfg: RnnConfig,
    pub params: RnnParams,
    pub state: RnnState,
    pub stream: TaskStream,
    pub step: usize,
}

impl Simulation {
    pub fn new(run: &RunConfig) -> Result<Self> {
        run.validate()?;
        let cfg = network_config(run)?;
        let params = RnnParams::init(&cfg, &mut rng::stream(run.seed, Stream::Weights));
        Ok(Simulation {
            state: RnnState::zeros(cfg.n),
            stream: task_stream(run)?,
            cfg,
            params,
            step: 0,
        })
    }

    /// Runs the network one step on the next sample without touching the
    /// parameters.
    pub fn advance(&mut self) -> std::result::Result<StepData, CoreError> {
        let Sample { x, y_star } = self.stream.next().expect("task streams are infinite");
        let (next, data) = StepData::compute(&self.cfg, &self.params, &self.state, &x, &y_star)?;
        if !data.loss.is_finite() {
            return Err(CoreError::NonFinite("loss"));
        }
        self.state = next;
        self.step += 1;
        Ok(data)
    }

    /// Exact online SGD step on `Wout`.
    pub fn train_readout(&mut self, data: &StepData, lr: f64) -> std::result::Result<(), CoreError> {
        let dw_out = rnn::output_gradient(&data.output, &data.target, &data.cache.a_new);
        rnn::sgd_out(&mut self.params, &dw_out, lr)
    }

    pub fn diverged(&self, loss: f64, learner: &dyn Learner) -> HarnessError {
        HarnessError::Diverged {
            step: self.step,
            loss,
            w_norm: self.params.w.frobenius_norm(),
            w_out_norm: self.params.w_out.frobenius_norm(),
            learner: learner.name(),
            learner_norm: learner.state_norm(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub config: RunConfig,
    #[serde(skip)]
    pub losses: Vec<f64>,
    #[serde(skip)]
    pub smoothed: Vec<f64>,
    /// Last point of the smoothed curve.
    pub final_loss: f64,
    /// Number of `W` updates applied.
    pub w_updates: usize,
    /// SHA-256 of the final `W` and `Wout` (little-endian f64).
    pub params_digest: String,
    pub wall_clock_secs: f64,
    pub seed: u64,
}

pub fn params_digest(params: &RnnParams) -> String {
    let mut hasher = Sha256::new();
    for x in params.w.as_slice().iter().chain(params.w_out.as_slice()) {
        hasher.update(x.to_le_bytes());
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn run_training(run: &RunConfig) -> Result<RunResult> {
    let start = Instant::now();
    let mut sim = Simulation::new(run)?;
    let mut learner = build_learner(run, &sim.cfg, &sim.params, run.algorithm)?;
    let mut losses = Vec::with_capacity(run.steps);
    let mut w_updates = 0;
    for _ in 0..run.steps {
        let data = match sim.advance() {
            Ok(d) => d,
            Err(CoreError::NonFinite(_)) => return Err(sim.diverged(f64::NAN, learner.as_ref())),
            Err(e) => return Err(e.into()),
        };
        losses.push(data.loss);
        let dw = learner
            .update(&data.context(&sim.cfg, &sim.params))
            .map_err(|e| match e {
                CoreError::NonFinite(_) => sim.diverged(data.loss, learner.as_ref()),
                other => other.into(),
            })?;
        sim.train_readout(&data, run.lr_out())
            .map_err(|_| sim.diverged(data.loss, learner.as_ref()))?;
        if let Some(dw) = dw {
            rnn::sgd_w(&mut sim.params, &dw, run.lr).map_err(|_| sim.diverged(data.loss, learner.as_ref()))?;
            w_updates += 1;
        }
    }
    let smoothed = smooth_loss(&losses, run.smooth_window(), run.smooth_average);
    Ok(RunResult {
        config: run.clone(),
        final_loss: smoothed.last().copied().unwrap_or(f64::NAN),
        w_updates,
        params_digest: params_digest(&sim.params),
        wall_clock_secs: start.elapsed().as_secs_f64(),
        seed: run.seed,
        losses,
        smoothed,
    })
}

/// Median wall time of a full training step (forward pass, learner update,
/// SGD) over `steps` steps on the Add task.
pub fn median_step_time(alg: Algorithm, n: usize, steps: usize, seed: u64) -> Result<Duration> {
    let run = RunConfig::new(TaskKind::Add, alg).with_seed(seed);
    let run = RunConfig { n, ..run };
    let mut sim = Simulation::new(&run)?;
    let mut learner = build_learner(&run, &sim.cfg, &sim.params, alg)?;
    let mut times = Vec::with_capacity(steps);
    for _ in 0..steps {
        let start = Instant::now();
        let data = sim.advance()?;
        let dw = learner.update(&data.context(&sim.cfg, &sim.params))?;
        sim.train_readout(&data, run.lr_out())?;
        if let Some(dw) = dw {
            rnn::sgd_w(&mut sim.params, &dw, run.lr)?;
        }
        times.push(start.elapsed());
    }
    times.sort();
    Ok(times.get(times.len() / 2).copied().unwrap_or_default())
}
