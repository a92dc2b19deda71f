//! Exact gradient engines.
//!
//! [`Rtrl`] carries the full influence matrix forward (past facing).
//! [`FBptt`] and [`EBptt`] backpropagate credit through a bounded window of
//! cached steps (future facing, up to truncation).

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::learner::{Learner, StepContext};
use crate::linalg::{axpy, dot, Matrix};
use crate::rnn::{ImmediateInfluence, RnnConfig};

/// Influence matrix `M` (`n × P`, column `i·m + j` holds `∂a/∂W_ij`).
#[derive(Debug, Clone, PartialEq)]
pub struct RtrlState {
    pub m: Matrix,
    scratch: Matrix,
}

impl RtrlState {
    pub fn new(n: usize, m: usize) -> Self {
        RtrlState {
            m: Matrix::zeros(n, n * m),
            scratch: Matrix::zeros(n, n * m),
        }
    }
}

/// `M ← J M + M̄`, returns `dW = c̄ M` rolled to `n × m`.
pub fn rtrl_step(state: &mut RtrlState, jacobian: &Matrix, mbar: &ImmediateInfluence, credit: &[f64]) -> Result<Matrix> {
    let n = mbar.n();
    let m = mbar.m();
    check_len("RTRL jacobian", n, jacobian.rows())?;
    check_len("RTRL influence", n * m, state.m.cols())?;

    jacobian.matmul_into(&state.m, &mut state.scratch);
    core::mem::swap(&mut state.m, &mut state.scratch);
    let d = mbar.diag();
    for (i, &di) in d.iter().enumerate() {
        let block = &mut state.m.row_mut(i)[i * m..(i + 1) * m];
        axpy(di, &mbar.a_hat, block);
    }
    if !state.m.is_finite() {
        return Err(Error::NonFinite("RTRL influence matrix"));
    }
    let flat = state.m.vec_mul(credit);
    Ok(Matrix::from_vec(n, m, flat))
}

#[derive(Debug, Clone)]
pub struct Rtrl {
    state: RtrlState,
}

impl Rtrl {
    pub fn new(cfg: &RnnConfig) -> Self {
        Rtrl {
            state: RtrlState::new(cfg.n, cfg.m()),
        }
    }

    pub fn influence(&self) -> &Matrix {
        &self.state.m
    }
}

impl Learner for Rtrl {
    fn name(&self) -> &'static str {
        "rtrl"
    }

    fn update(&mut self, ctx: &StepContext<'_>) -> Result<Option<Matrix>> {
        rtrl_step(&mut self.state, ctx.jacobian, &ctx.influence(), ctx.credit).map(Some)
    }

    fn footprint(&self) -> usize {
        self.state.m.as_slice().len()
    }

    fn state_norm(&self) -> f64 {
        self.state.m.frobenius_norm()
    }
}

/// One cached step for the backpropagating learners.
#[derive(Debug, Clone, PartialEq)]
pub struct CachedStep {
    pub influence: ImmediateInfluence,
    pub jacobian: Matrix,
    pub credit: Vec<f64>,
}

impl CachedStep {
    pub fn from_context(ctx: &StepContext<'_>) -> Self {
        CachedStep {
            influence: ctx.influence(),
            jacobian: ctx.jacobian.clone(),
            credit: ctx.credit.to_vec(),
        }
    }

    fn len(&self) -> usize {
        self.influence.n() + self.influence.m() + self.jacobian.as_slice().len() + self.credit.len()
    }
}

/// `c M̄` rolled to `n × m`, i.e. `(c ⊙ αφ') âᵀ`.
pub fn credit_times_influence(credit: &[f64], mbar: &ImmediateInfluence) -> Matrix {
    mbar.contract(credit)
}

/// Segment buffer for efficient BPTT.
#[derive(Debug, Clone)]
pub struct EBpttBuffer {
    steps: Vec<CachedStep>,
}

impl EBpttBuffer {
    pub fn new() -> Self {
        EBpttBuffer { steps: Vec::new() }
    }

    pub fn push(&mut self, step: CachedStep) {
        self.steps.push(step);
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

impl Default for EBpttBuffer {
    fn default() -> Self {
        Self::new()
    }
}

/// Backpropagates `c(s) = c̄(s) + c(s+1) J(s+1)` through the buffered segment
/// and returns the triangular sum `Σ_{t ≥ s} ∂L(t)/∂W(s)`. Empties the buffer.
pub fn ebptt_flush(buffer: &mut EBpttBuffer) -> Result<Matrix> {
    let last = buffer
        .steps
        .last()
        .ok_or(Error::Contract("E-BPTT flush on an empty segment"))?;
    let (n, m) = (last.influence.n(), last.influence.m());
    let mut dw = Matrix::zeros(n, m);
    let mut c: Vec<f64> = alloc::vec![0.0; n];
    let mut next_jacobian: Option<&Matrix> = None;
    for step in buffer.steps.iter().rev() {
        let carried = match next_jacobian {
            Some(j) => j.vec_mul(&c),
            None => alloc::vec![0.0; n],
        };
        c = step.credit.iter().zip(&carried).map(|(a, b)| a + b).collect();
        dw.add_scaled(1.0, &credit_times_influence(&c, &step.influence));
        next_jacobian = Some(&step.jacobian);
    }
    buffer.steps.clear();
    if !dw.is_finite() {
        return Err(Error::NonFinite("E-BPTT gradient"));
    }
    Ok(dw)
}

/// BPTT over non-overlapping segments of `horizon` steps; one gradient per
/// segment.
#[derive(Debug, Clone)]
pub struct EBptt {
    horizon: usize,
    buffer: EBpttBuffer,
}

impl EBptt {
    pub fn new(horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Config("truncation horizon must be at least 1"));
        }
        Ok(EBptt {
            horizon,
            buffer: EBpttBuffer::new(),
        })
    }
}

impl Learner for EBptt {
    fn name(&self) -> &'static str {
        "e-bptt"
    }

    fn update(&mut self, ctx: &StepContext<'_>) -> Result<Option<Matrix>> {
        self.buffer.push(CachedStep::from_context(ctx));
        if self.buffer.len() == self.horizon {
            ebptt_flush(&mut self.buffer).map(Some)
        } else {
            Ok(None)
        }
    }

    fn drain(&mut self) -> Option<Matrix> {
        if self.buffer.is_empty() {
            None
        } else {
            ebptt_flush(&mut self.buffer).ok()
        }
    }

    fn footprint(&self) -> usize {
        self.buffer.steps.iter().map(CachedStep::len).sum()
    }

    fn state_norm(&self) -> f64 {
        libm::sqrt(self.buffer.steps.iter().map(|s| dot(&s.credit, &s.credit)).sum())
    }
}

/// Running credit estimate `ĉ(s)` for one buffered step.
#[derive(Debug, Clone, PartialEq)]
struct Pending {
    c_hat: Vec<f64>,
    step: CachedStep,
}

/// Truncated credit estimates `[ĉ(t-T+1), …, ĉ(t)]`, newest at the back.
#[derive(Debug, Clone)]
pub struct FBpttState {
    horizon: usize,
    pending: VecDeque<Pending>,
}

impl FBpttState {
    pub fn new(horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Config("truncation horizon must be at least 1"));
        }
        Ok(FBpttState {
            horizon,
            pending: VecDeque::with_capacity(horizon),
        })
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    /// Current `ĉ` estimates, oldest first.
    pub fn estimates(&self) -> impl Iterator<Item = &[f64]> {
        self.pending.iter().map(|p| p.c_hat.as_slice())
    }
}

/// Extends every stored `ĉ(s)` by `∂L(t)/∂a(s)`, appends `c̄(t)`, and once
/// `T` estimates are held pops the oldest as `ĉ(s) M̄(s)`.
pub fn fbptt_step(state: &mut FBpttState, step: CachedStep) -> Result<Option<Matrix>> {
    let mut v = step.credit.clone();
    let mut next_jacobian = &step.jacobian;
    for pending in state.pending.iter_mut().rev() {
        v = next_jacobian.vec_mul(&v);
        axpy(1.0, &v, &mut pending.c_hat);
        next_jacobian = &pending.step.jacobian;
    }
    state.pending.push_back(Pending {
        c_hat: step.credit.clone(),
        step,
    });
    if state.pending.len() < state.horizon {
        return Ok(None);
    }
    let oldest = state.pending.pop_front().expect("buffer is non-empty");
    let dw = credit_times_influence(&oldest.c_hat, &oldest.step.influence);
    if !dw.is_finite() {
        return Err(Error::NonFinite("F-BPTT gradient"));
    }
    Ok(Some(dw))
}

/// Future-facing BPTT: every step emits the truncated future-facing gradient
/// of the parameter application `T - 1` steps ago.
#[derive(Debug, Clone)]
pub struct FBptt {
    state: FBpttState,
}

impl FBptt {
    pub fn new(horizon: usize) -> Result<Self> {
        Ok(FBptt {
            state: FBpttState::new(horizon)?,
        })
    }

    pub fn horizon(&self) -> usize {
        self.state.horizon
    }
}

impl Learner for FBptt {
    fn name(&self) -> &'static str {
        "f-bptt"
    }

    fn update(&mut self, ctx: &StepContext<'_>) -> Result<Option<Matrix>> {
        fbptt_step(&mut self.state, CachedStep::from_context(ctx))
    }

    fn delay(&self) -> usize {
        self.state.horizon - 1
    }

    /// Sum of the partial gradients still pending.
    fn drain(&mut self) -> Option<Matrix> {
        let mut pending = self.state.pending.drain(..);
        let first = pending.next()?;
        let mut dw = credit_times_influence(&first.c_hat, &first.step.influence);
        for p in pending {
            dw.add_scaled(1.0, &credit_times_influence(&p.c_hat, &p.step.influence));
        }
        Some(dw)
    }

    fn footprint(&self) -> usize {
        self.state.pending.iter().map(|p| p.c_hat.len() + p.step.len()).sum()
    }

    fn state_norm(&self) -> f64 {
        libm::sqrt(self.state.pending.iter().map(|p| dot(&p.c_hat, &p.c_hat)).sum())
    }
}
