//! Random-feedback local online learning: `J` is approximated by `(1 - α) I`,
//! leaving an eligibility trace per synapse.

use super::InfluenceEstimate;
use crate::error::{check_len, Error, Result};
use crate::learner::{Learner, StepContext};
use crate::linalg::Matrix;
use crate::rnn::{ImmediateInfluence, RnnConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RfloTrace {
    /// `n × m`
    pub b: Matrix,
}

impl RfloTrace {
    pub fn new(n: usize, m: usize) -> Self {
        RfloTrace { b: Matrix::zeros(n, m) }
    }
}

impl InfluenceEstimate for RfloTrace {
    fn influence_estimate(&self) -> Matrix {
        let (n, m) = self.b.shape();
        let mut out = Matrix::zeros(n, n * m);
        for i in 0..n {
            out.row_mut(i)[i * m..(i + 1) * m].copy_from_slice(self.b.row(i));
        }
        out
    }
}

/// `B_ij ← (1 - d_i) B_ij + (α φ'_i) â_j`, the leaky trace shared with KeRNL.
pub(crate) fn leaky_trace(b: &mut Matrix, decay: impl Fn(usize) -> f64, mbar: &ImmediateInfluence) {
    let d = mbar.diag();
    for (i, di) in d.iter().enumerate() {
        let keep = 1.0 - decay(i);
        for (bij, aj) in b.row_mut(i).iter_mut().zip(&mbar.a_hat) {
            *bij = keep * *bij + di * aj;
        }
    }
}

/// `dW_ij = u_i B_ij`
pub(crate) fn row_scaled(b: &Matrix, u: &[f64]) -> Matrix {
    let mut dw = b.clone();
    for (i, ui) in u.iter().enumerate() {
        dw.row_mut(i).iter_mut().for_each(|x| *x *= ui);
    }
    dw
}

/// Advances the trace with the network's `α` and returns `dW_ij = c̄_i B_ij`.
pub fn rflo_step(state: &mut RfloTrace, mbar: &ImmediateInfluence, credit: &[f64]) -> Result<Matrix> {
    check_len("RFLO trace rows", mbar.n(), state.b.rows())?;
    check_len("RFLO trace cols", mbar.m(), state.b.cols())?;
    let alpha = mbar.alpha;
    leaky_trace(&mut state.b, |_| alpha, mbar);
    if !state.b.is_finite() {
        return Err(Error::NonFinite("RFLO trace"));
    }
    Ok(row_scaled(&state.b, credit))
}

#[derive(Debug, Clone)]
pub struct Rflo {
    state: RfloTrace,
}

impl Rflo {
    pub fn new(cfg: &RnnConfig) -> Self {
        Rflo {
            state: RfloTrace::new(cfg.n, cfg.m()),
        }
    }
}

impl Learner for Rflo {
    fn name(&self) -> &'static str {
        "rflo"
    }

    fn update(&mut self, ctx: &StepContext<'_>) -> Result<Option<Matrix>> {
        rflo_step(&mut self.state, &ctx.influence(), ctx.credit).map(Some)
    }

    fn footprint(&self) -> usize {
        self.state.b.as_slice().len()
    }

    fn state_norm(&self) -> f64 {
        self.state.b.frobenius_norm()
    }
}
