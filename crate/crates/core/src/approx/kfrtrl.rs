//! Kronecker-factored RTRL: `M[k,i,j] ≈ A_j B_ki`.

use alloc::vec::Vec;

use super::{balance, InfluenceEstimate};
use crate::error::{check_len, Error, Result};
use crate::learner::{Learner, StepContext};
use crate::linalg::{norm, Matrix};
use crate::rng::{self, SimRng, Stream};
use crate::rnn::{ImmediateInfluence, RnnConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct KronState {
    /// length `m`
    pub a: Vec<f64>,
    /// `n × n`
    pub b: Matrix,
}

impl KronState {
    /// `A ~ N(0, 1)`, `B ~ N(0, 1/√n)`.
    pub fn init<R: rand::Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Self {
        KronState {
            a: rng::gaussian_vec(rng, m, 1.0),
            b: rng::gaussian_matrix(rng, n, n, 1.0 / libm::sqrt(n as f64)),
        }
    }
}

impl InfluenceEstimate for KronState {
    fn influence_estimate(&self) -> Matrix {
        let n = self.b.rows();
        let m = self.a.len();
        let mut out = Matrix::zeros(n, n * m);
        for k in 0..n {
            let row = out.row_mut(k);
            for i in 0..n {
                let bki = self.b[(k, i)];
                for j in 0..m {
                    row[i * m + j] = self.a[j] * bki;
                }
            }
        }
        out
    }
}

/// `A ← ν₀ρ₀A + ν₁ρ₁â`, `B ← (ν₀/ρ₀) J B + (ν₁/ρ₁) D`; returns
/// `dW_ij = (c̄ B)_i A_j`.
pub fn kfrtrl_step(
    state: &mut KronState,
    jacobian: &Matrix,
    mbar: &ImmediateInfluence,
    credit: &[f64],
    nu: [f64; 2],
) -> Result<Matrix> {
    check_len("KF-RTRL A", mbar.m(), state.a.len())?;
    check_len("KF-RTRL B", mbar.n(), state.b.rows())?;

    let jb = jacobian.matmul(&state.b);
    let d = mbar.diag();
    let rho0 = balance(jb.frobenius_norm(), norm(&state.a));
    let rho1 = balance(norm(&d), norm(&mbar.a_hat));
    let (s0, s1) = (nu[0] * rho0, nu[1] * rho1);
    state.a = state.a.iter().zip(&mbar.a_hat).map(|(a, x)| s0 * a + s1 * x).collect();
    state.b = jb.scaled(nu[0] / rho0);
    let c1 = nu[1] / rho1;
    for (i, di) in d.iter().enumerate() {
        state.b[(i, i)] += c1 * di;
    }
    if !(state.b.is_finite() && state.a.iter().all(|x| x.is_finite())) {
        return Err(Error::NonFinite("KF-RTRL state"));
    }
    Ok(Matrix::outer(&state.b.vec_mul(credit), &state.a))
}

#[derive(Debug, Clone)]
pub struct KfRtrl {
    state: KronState,
    noise: SimRng,
}

impl KfRtrl {
    pub fn new(cfg: &RnnConfig, seed: u64) -> Self {
        let mut init = rng::stream(seed, Stream::LearnerInit);
        KfRtrl {
            state: KronState::init(cfg.n, cfg.m(), &mut init),
            noise: rng::stream(seed, Stream::LearnerNoise),
        }
    }

    pub fn state(&self) -> &KronState {
        &self.state
    }
}

impl Learner for KfRtrl {
    fn name(&self) -> &'static str {
        "kf-rtrl"
    }

    fn update(&mut self, ctx: &StepContext<'_>) -> Result<Option<Matrix>> {
        let nu = rng::sign_vec(&mut self.noise, 2);
        kfrtrl_step(&mut self.state, ctx.jacobian, &ctx.influence(), ctx.credit, [nu[0], nu[1]]).map(Some)
    }

    fn footprint(&self) -> usize {
        self.state.a.len() + self.state.b.as_slice().len()
    }

    fn state_norm(&self) -> f64 {
        norm(&self.state.a) * self.state.b.frobenius_norm()
    }
}
