//! Run configuration with defaults, validation and `key = value` overrides.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Add,
    Mimic,
}

impl TaskKind {
    pub const ALL: [TaskKind; 2] = [TaskKind::Add, TaskKind::Mimic];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Add => "add",
            TaskKind::Mimic => "mimic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Rtrl,
    Uoro,
    KfRtrl,
    RKfRtrl,
    Kernl,
    Rflo,
    Dni,
    DniB,
    EBptt,
    FBptt,
    FixedW,
}

impl Algorithm {
    pub const ALL: [Algorithm; 11] = [
        Algorithm::Rtrl,
        Algorithm::Uoro,
        Algorithm::KfRtrl,
        Algorithm::RKfRtrl,
        Algorithm::Kernl,
        Algorithm::Rflo,
        Algorithm::Dni,
        Algorithm::DniB,
        Algorithm::EBptt,
        Algorithm::FBptt,
        Algorithm::FixedW,
    ];

    /// Approximations that carry influence forward in time.
    pub const PAST_FACING: [Algorithm; 5] = [
        Algorithm::Uoro,
        Algorithm::KfRtrl,
        Algorithm::RKfRtrl,
        Algorithm::Kernl,
        Algorithm::Rflo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Rtrl => "rtrl",
            Algorithm::Uoro => "uoro",
            Algorithm::KfRtrl => "kf-rtrl",
            Algorithm::RKfRtrl => "r-kf-rtrl",
            Algorithm::Kernl => "kernl",
            Algorithm::Rflo => "rflo",
            Algorithm::Dni => "dni",
            Algorithm::DniB => "dni-b",
            Algorithm::EBptt => "e-bptt",
            Algorithm::FBptt => "f-bptt",
            Algorithm::FixedW => "fixed-w",
        }
    }
}

macro_rules! string_enum {
    ($ty:ty, $what:literal) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = HarnessError;

            fn from_str(s: &str) -> Result<Self> {
                <$ty>::ALL
                    .iter()
                    .copied()
                    .find(|v| v.as_str().eq_ignore_ascii_case(s))
                    .ok_or_else(|| {
                        let choices: Vec<&str> = <$ty>::ALL.iter().map(|v| v.as_str()).collect();
                        HarnessError::Config(format!("unknown {} `{s}`; expected one of {}", $what, choices.join(", ")))
                    })
            }
        }
    };
}

string_enum!(TaskKind, "task");
string_enum!(Algorithm, "algorithm");

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskKind,
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub n: usize,
    /// Learning rate for `W`.
    pub lr: f64,
    /// Learning rate for `Wout`; defaults to `lr`.
    pub lr_out: Option<f64>,
    pub steps: usize,
    pub seed: u64,
    /// Truncation horizon for E-BPTT and F-BPTT.
    pub truncation: usize,
    pub kernl_initial_alpha: f64,
    pub kernl_meta_lr: f64,
    pub kernl_sigma: f64,
    pub kernl_meta_learning: bool,
    /// Synthetic-gradient learning rate; defaults depend on task and `alpha`.
    pub dni_lr: Option<f64>,
    pub dni_jhat_lr: Option<f64>,
    pub dni_tau: usize,
    /// Down-sampling block for the smoothed curve; defaults to `steps / 1000`.
    pub smooth_window: Option<usize>,
    pub smooth_average: usize,
}

impl RunConfig {
    pub fn new(task: TaskKind, algorithm: Algorithm) -> Self {
        RunConfig {
            task,
            algorithm,
            alpha: 1.0,
            n: 32,
            lr: 1e-4,
            lr_out: None,
            steps: 100_000,
            seed: 0,
            truncation: 10,
            kernl_initial_alpha: 0.8,
            kernl_meta_lr: 5.0,
            kernl_sigma: 1e-3,
            kernl_meta_learning: true,
            dni_lr: None,
            dni_jhat_lr: None,
            dni_tau: 5,
            smooth_window: None,
            smooth_average: 10,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn lr_out(&self) -> f64 {
        self.lr_out.unwrap_or(self.lr)
    }

    /// `5e-2` on Add at `α = 1`, otherwise `1e-3`.
    pub fn dni_lr(&self) -> f64 {
        self.dni_lr.unwrap_or(if self.add_discrete() { 5e-2 } else { 1e-3 })
    }

    /// `1e-2` on Add at `α = 1`, otherwise `1e-3`.
    pub fn dni_jhat_lr(&self) -> f64 {
        self.dni_jhat_lr.unwrap_or(if self.add_discrete() { 1e-2 } else { 1e-3 })
    }

    fn add_discrete(&self) -> bool {
        self.task == TaskKind::Add && self.alpha == 1.0
    }

    pub fn smooth_window(&self) -> usize {
        self.smooth_window.unwrap_or((self.steps / 1000).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(HarnessError::Config(msg.to_string()));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return fail("alpha must lie in (0, 1]");
        }
        if self.n == 0 {
            return fail("n must be positive");
        }
        if !(self.lr.is_finite() && self.lr >= 0.0 && self.lr_out().is_finite() && self.lr_out() >= 0.0) {
            return fail("learning rates must be finite and non-negative");
        }
        if self.truncation == 0 {
            return fail("truncation must be at least 1");
        }
        if self.dni_tau == 0 {
            return fail("dni_tau must be at least 1");
        }
        if self.smooth_window == Some(0) || self.smooth_average == 0 {
            return fail("smoothing windows must be at least 1");
        }
        if !(self.kernl_initial_alpha > 0.0 && self.kernl_initial_alpha < 1.0) {
            return fail("kernl_initial_alpha must lie in (0, 1)");
        }
        if !(self.kernl_sigma >= 0.0 && self.kernl_sigma.is_finite()) {
            return fail("kernl_sigma must be finite and non-negative");
        }
        Ok(())
    }

    /// Applies `key = value` overrides (TOML syntax). Unknown keys are rejected.
    pub fn apply_overrides(&self, text: &str) -> Result<RunConfig> {
        let overrides: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| HarnessError::Config(format!("override file: {e}")))?;
        let mut merged = toml::Table::try_from(self).map_err(|e| HarnessError::Config(e.to_string()))?;
        for (key, value) in overrides {
            merged.insert(key, value);
        }
        let cfg: RunConfig = merged
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(format!("override file: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_override_file(&self, path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        self.apply_overrides(&text)
    }
}
