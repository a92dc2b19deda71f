//! How much of the Add label is linearly decodable from the hidden state of an
//! untrained network at various time shifts.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use online_rnn_core::rng::{self, Stream};
use online_rnn_core::rnn::{self, InitConfig, RecurrentInit, RnnConfig, RnnParams, RnnState};
use online_rnn_core::tasks::{AddConfig, AddStream};
use serde::Serialize;

use crate::error::{HarnessError, Result};

/// Added to the diagonal of the normal equations.
pub const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitScheme {
    Orthogonal,
    Gaussian,
    Symmetric,
    Diagonal,
}

impl InitScheme {
    pub const ALL: [InitScheme; 4] = [
        InitScheme::Orthogonal,
        InitScheme::Gaussian,
        InitScheme::Symmetric,
        InitScheme::Diagonal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InitScheme::Orthogonal => "orthogonal",
            InitScheme::Gaussian => "gaussian",
            InitScheme::Symmetric => "symmetric",
            InitScheme::Diagonal => "diagonal",
        }
    }

    pub fn recurrent(self) -> RecurrentInit {
        match self {
            InitScheme::Orthogonal => RecurrentInit::Orthogonal,
            InitScheme::Gaussian => RecurrentInit::Gaussian,
            InitScheme::Symmetric => RecurrentInit::Symmetric,
            InitScheme::Diagonal => RecurrentInit::Diagonal,
        }
    }

    /// Scale of the recurrent block, as recorded in output metadata.
    pub fn scale_note(self) -> &'static str {
        match self {
            InitScheme::Orthogonal => "Haar orthogonal, spectral radius 1",
            InitScheme::Gaussian => "i.i.d. N(0, 1/n) entries (std 1/sqrt(n))",
            InitScheme::Symmetric => "(G + G^T) / (2 sqrt 2) with G ~ N(0, 1/n), spectral radius about 1",
            InitScheme::Diagonal => "diagonal, i.i.d. N(0, 1) entries",
        }
    }
}

impl fmt::Display for InitScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InitScheme {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        InitScheme::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| HarnessError::Config(format!("unknown init scheme `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MemTraceResult {
    pub scheme: InitScheme,
    pub delta_t: i64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemTraceConfig {
    pub n: usize,
    pub alpha: f64,
    pub steps: usize,
    pub delta_t: std::ops::RangeInclusive<i64>,
    pub seed: u64,
}

impl Default for MemTraceConfig {
    fn default() -> Self {
        MemTraceConfig {
            n: 32,
            alpha: 1.0,
            steps: 20_000,
            delta_t: -20..=10,
            seed: 0,
        }
    }
}

/// `r²` of an ordinary least-squares fit of `y` on the rows of `x` plus an
/// intercept, solved through ridge-stabilized normal equations.
pub fn ols_r2(x: &[Vec<f64>], y: &[f64]) -> Result<f64> {
    assert_eq!(x.len(), y.len(), "one regressor row per response");
    let rows = x.len();
    if rows == 0 {
        return Err(HarnessError::Degenerate("regression without samples"));
    }
    let p = x[0].len() + 1;
    let design = DMatrix::from_fn(rows, p, |i, j| if j + 1 == p { 1.0 } else { x[i][j] });
    let response = DVector::from_column_slice(y);
    let mean = response.mean();
    let ss_tot: f64 = response.iter().map(|v| (v - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(HarnessError::Degenerate("constant regression target"));
    }
    let mut gram = design.transpose() * &design;
    for i in 0..p {
        gram[(i, i)] += RIDGE;
    }
    let rhs = design.transpose() * &response;
    let coef = gram
        .cholesky()
        .ok_or(HarnessError::Degenerate("normal equations not positive definite"))?
        .solve(&rhs);
    let residual = response - design * coef;
    Ok(1.0 - residual.norm_squared() / ss_tot)
}

/// Runs an untrained network with the given recurrent scheme on the Add task
/// and returns `r²` of regressing `y*(t)` (first component) on `a(t + Δt)`.
pub fn memory_trace_r2(scheme: InitScheme, config: &MemTraceConfig) -> Result<Vec<MemTraceResult>> {
    let cfg = RnnConfig::classifier(config.n, 2, 2, config.alpha)?;
    let init = InitConfig {
        recurrent: scheme.recurrent(),
        ..InitConfig::default()
    };
    let params = RnnParams::init_with(&cfg, &init, &mut rng::stream(config.seed, Stream::Weights));
    let stream = AddStream::new(AddConfig::for_alpha(config.alpha), config.seed)?;

    let mut state = RnnState::zeros(cfg.n);
    let mut states = Vec::with_capacity(config.steps);
    let mut labels = Vec::with_capacity(config.steps);
    for sample in stream.take(config.steps) {
        let (next, _) = rnn::step(&cfg, &params, &state, &sample.x)?;
        states.push(next.a.clone());
        labels.push(sample.y_star[0]);
        state = next;
    }

    config
        .delta_t
        .clone()
        .map(|dt| {
            let (x, y): (Vec<Vec<f64>>, Vec<f64>) = (0..config.steps as i64)
                .filter_map(|t| {
                    let shifted = t + dt;
                    (0..config.steps as i64)
                        .contains(&shifted)
                        .then(|| (states[shifted as usize].clone(), labels[t as usize]))
                })
                .unzip();
            Ok(MemTraceResult {
                scheme,
                delta_t: dt,
                r_squared: ols_r2(&x, &y)?,
            })
        })
        .collect()
}
