//! Streaming synthetic tasks.
//!
//! * Add: Bernoulli bits with a label that is a linear function of the bits at
//!   two fixed lags.
//! * Mimic: reproduce the affine readout of a random untrained RNN fed the
//!   same input stream.
//!
//! Both streams are pure functions of `(config, seed)`.

use alloc::collections::VecDeque;
use alloc::vec::Vec;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{self, SimRng, Stream};
use crate::rnn::{self, InitConfig, RnnConfig, RnnParams, RnnState};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y_star: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AddConfig {
    pub t1: usize,
    pub t2: usize,
    pub bernoulli_p: f64,
    /// Each base sample is repeated this many consecutive steps.
    pub stretch: usize,
}

impl AddConfig {
    /// Lags 6 and 10 for `α = 1`; lags 3 and 5 with two-fold stretching
    /// otherwise.
    pub fn for_alpha(alpha: f64) -> Self {
        if alpha >= 1.0 {
            AddConfig {
                t1: 6,
                t2: 10,
                bernoulli_p: 0.5,
                stretch: 1,
            }
        } else {
            AddConfig {
                t1: 3,
                t2: 5,
                bernoulli_p: 0.5,
                stretch: 2,
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0 < self.t1 && self.t1 < self.t2) {
            return Err(Error::Config("Add lags must satisfy 0 < t1 < t2"));
        }
        if !(0.0..=1.0).contains(&self.bernoulli_p) {
            return Err(Error::Config("Bernoulli rate must lie in [0, 1]"));
        }
        if self.stretch == 0 {
            return Err(Error::Config("stretch factor must be at least 1"));
        }
        Ok(())
    }
}

impl Default for AddConfig {
    fn default() -> Self {
        Self::for_alpha(1.0)
    }
}

/// `0.5 + 0.5 x(t - t1) - 0.25 x(t - t2)`
pub fn add_label(bit_t1: bool, bit_t2: bool) -> f64 {
    0.5 + 0.5 * f64::from(u8::from(bit_t1)) - 0.25 * f64::from(u8::from(bit_t2))
}

/// Replays a stretched base stream: draws a new base sample every `stretch`
/// steps.
#[derive(Debug, Clone)]
struct Stretcher {
    stretch: usize,
    remaining: usize,
    current: Option<Sample>,
}

impl Stretcher {
    fn new(stretch: usize) -> Self {
        Stretcher {
            stretch,
            remaining: 0,
            current: None,
        }
    }

    fn exhausted(&self) -> bool {
        self.remaining == 0
    }

    fn load(&mut self, sample: Sample) {
        self.current = Some(sample);
        self.remaining = self.stretch;
    }

    fn emit(&mut self) -> Sample {
        self.remaining -= 1;
        self.current.clone().expect("a sample was loaded")
    }
}

/// Infinite Add stream; `x = [b, 1 - b]`, `y* = [y, 1 - y]`.
#[derive(Debug, Clone)]
pub struct AddStream {
    config: AddConfig,
    rng: SimRng,
    /// Base bits, newest at the back; holds the last `t2` bits.
    history: VecDeque<bool>,
    stretcher: Stretcher,
}

impl AddStream {
    pub fn new(config: AddConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(AddStream {
            config,
            rng: rng::stream(seed, Stream::Task),
            history: core::iter::repeat_n(false, config.t2).collect(),
            stretcher: Stretcher::new(config.stretch),
        })
    }

    fn draw(&mut self) -> Sample {
        let bit = self.rng.random_bool(self.config.bernoulli_p);
        let len = self.history.len();
        let lagged = |lag: usize| self.history[len - lag];
        let y = add_label(lagged(self.config.t1), lagged(self.config.t2));
        self.history.pop_front();
        self.history.push_back(bit);
        let b = f64::from(u8::from(bit));
        Sample {
            x: alloc::vec![b, 1.0 - b],
            y_star: alloc::vec![y, 1.0 - y],
        }
    }
}

impl Iterator for AddStream {
    type Item = Sample;

    fn next(&mut self) -> Option<Sample> {
        if self.stretcher.exhausted() {
            let sample = self.draw();
            self.stretcher.load(sample);
        }
        Some(self.stretcher.emit())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MimicConfig {
    pub target_config: RnnConfig,
    pub target_params: RnnParams,
    pub bernoulli_p: f64,
    pub stretch: usize,
}

impl MimicConfig {
    /// Target network with `n` units, `α = 1`, default initialization except
    /// biases drawn from `N(0, 0.1)`.
    pub fn random(n: usize, n_in: usize, n_out: usize, stretch: usize, seed: u64) -> Result<Self> {
        let target_config = RnnConfig::regressor(n, n_in, n_out, 1.0)?;
        let mut rng = rng::stream(seed, Stream::Target);
        let target_params = RnnParams::init_with(&target_config, &InitConfig::target(), &mut rng);
        Ok(MimicConfig {
            target_config,
            target_params,
            bernoulli_p: 0.5,
            stretch,
        })
    }

    /// 32 units, 32 inputs, 32 outputs; stretched two-fold when `α < 1`.
    pub fn for_alpha(alpha: f64, seed: u64) -> Result<Self> {
        let stretch = if alpha >= 1.0 { 1 } else { 2 };
        Self::random(32, 32, 32, stretch, seed)
    }

    pub fn validate(&self) -> Result<()> {
        self.target_config.validate()?;
        self.target_params.check(&self.target_config)?;
        if self.stretch == 0 {
            return Err(Error::Config("stretch factor must be at least 1"));
        }
        Ok(())
    }
}

/// Infinite Mimic stream. Inputs are i.i.d. Bernoulli vectors; labels are the
/// target network's affine readout after consuming the input.
#[derive(Debug, Clone)]
pub struct MimicStream {
    config: MimicConfig,
    rng: SimRng,
    state: RnnState,
    stretcher: Stretcher,
}

impl MimicStream {
    pub fn new(config: MimicConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let n = config.target_config.n;
        Ok(MimicStream {
            stretcher: Stretcher::new(config.stretch),
            config,
            rng: rng::stream(seed, Stream::Task),
            state: RnnState::zeros(n),
        })
    }

    pub fn config(&self) -> &MimicConfig {
        &self.config
    }

    fn draw(&mut self) -> Sample {
        let cfg = &self.config.target_config;
        let p = self.config.bernoulli_p;
        let x: Vec<f64> = (0..cfg.n_in)
            .map(|_| f64::from(u8::from(self.rng.random_bool(p))))
            .collect();
        let (next, _) = rnn::step(cfg, &self.config.target_params, &self.state, &x)
            .expect("target network shapes were validated and tanh keeps the state bounded");
        let y_star = rnn::readout(cfg, &self.config.target_params, &next.a);
        self.state = next;
        Sample { x, y_star }
    }
}

impl Iterator for MimicStream {
    type Item = Sample;

    fn next(&mut self) -> Option<Sample> {
        if self.stretcher.exhausted() {
            let sample = self.draw();
            self.stretcher.load(sample);
        }
        Some(self.stretcher.emit())
    }
}

/// Which task a run uses; dimensions follow from the task.
#[derive(Debug, Clone)]
pub enum TaskStream {
    Add(AddStream),
    Mimic(MimicStream),
}

impl Iterator for TaskStream {
    type Item = Sample;

    fn next(&mut self) -> Option<Sample> {
        match self {
            TaskStream::Add(s) => s.next(),
            TaskStream::Mimic(s) => s.next(),
        }
    }
}
