//! Reverse Kronecker-factored RTRL: `M[k,i,j] ≈ A_i B_kj`.

use alloc::vec::Vec;

use super::{balance, InfluenceEstimate};
use crate::error::{check_len, Error, Result};
use crate::learner::{Learner, StepContext};
use crate::linalg::{norm, Matrix};
use crate::rng::{self, SimRng, Stream};
use crate::rnn::{ImmediateInfluence, RnnConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RKronState {
    /// length `n`
    pub a: Vec<f64>,
    /// `n × m`
    pub b: Matrix,
}

impl RKronState {
    /// `A ~ N(0, 1)`, `B ~ N(0, 1/√n)`.
    pub fn init<R: rand::Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Self {
        RKronState {
            a: rng::gaussian_vec(rng, n, 1.0),
            b: rng::gaussian_matrix(rng, n, m, 1.0 / libm::sqrt(n as f64)),
        }
    }
}

impl InfluenceEstimate for RKronState {
    fn influence_estimate(&self) -> Matrix {
        let n = self.a.len();
        let m = self.b.cols();
        let mut out = Matrix::zeros(n, n * m);
        for k in 0..n {
            let bk = self.b.row(k);
            let row = out.row_mut(k);
            for (i, &ai) in self.a.iter().enumerate() {
                for j in 0..m {
                    row[i * m + j] = ai * bk[j];
                }
            }
        }
        out
    }
}

/// `A ← ρ₀A + ρ₁ν`, `B ← J B / ρ₀ + (Σ_i ν_i M̄[·,i,·]) / ρ₁`; returns
/// `dW_ij = A_i (c̄ B)_j`.
pub fn rkf_step(
    state: &mut RKronState,
    jacobian: &Matrix,
    mbar: &ImmediateInfluence,
    credit: &[f64],
    nu: &[f64],
) -> Result<Matrix> {
    let n = mbar.n();
    check_len("R-KF-RTRL A", n, state.a.len())?;
    check_len("R-KF-RTRL noise", n, nu.len())?;
    check_len("R-KF-RTRL B cols", mbar.m(), state.b.cols())?;

    let jb = jacobian.matmul(&state.b);
    let contraction = mbar.contract(nu);
    let rho0 = balance(jb.frobenius_norm(), norm(&state.a));
    let rho1 = balance(contraction.frobenius_norm(), norm(nu));
    state.a = state.a.iter().zip(nu).map(|(a, v)| rho0 * a + rho1 * v).collect();
    state.b = jb.scaled(1.0 / rho0);
    state.b.add_scaled(1.0 / rho1, &contraction);
    if !(state.b.is_finite() && state.a.iter().all(|x| x.is_finite())) {
        return Err(Error::NonFinite("R-KF-RTRL state"));
    }
    Ok(Matrix::outer(&state.a, &state.b.vec_mul(credit)))
}

#[derive(Debug, Clone)]
pub struct RkfRtrl {
    state: RKronState,
    noise: SimRng,
}

impl RkfRtrl {
    pub fn new(cfg: &RnnConfig, seed: u64) -> Self {
        let mut init = rng::stream(seed, Stream::LearnerInit);
        RkfRtrl {
            state: RKronState::init(cfg.n, cfg.m(), &mut init),
            noise: rng::stream(seed, Stream::LearnerNoise),
        }
    }

    pub fn state(&self) -> &RKronState {
        &self.state
    }
}

impl Learner for RkfRtrl {
    fn name(&self) -> &'static str {
        "r-kf-rtrl"
    }

    fn update(&mut self, ctx: &StepContext<'_>) -> Result<Option<Matrix>> {
        let nu = rng::sign_vec(&mut self.noise, ctx.config.n);
        rkf_step(&mut self.state, ctx.jacobian, &ctx.influence(), ctx.credit, &nu).map(Some)
    }

    fn footprint(&self) -> usize {
        self.state.a.len() + self.state.b.as_slice().len()
    }

    fn state_norm(&self) -> f64 {
        norm(&self.state.a) * self.state.b.frobenius_norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_norms_leave_scales_at_one() {
        // ‖JB‖ = ‖A‖ = 1 and ‖νᵀM̄‖ = ‖ν‖ = √2.
        let mut s = RKronState {
            a: alloc::vec![1.0, 0.0],
            b: Matrix::from_vec(2, 2, alloc::vec![1.0, 0.0, 0.0, 0.0]),
        };
        let mbar = ImmediateInfluence {
            phi_prime: alloc::vec![1.0, 1.0],
            a_hat: alloc::vec![1.0, 0.0],
            alpha: 1.0,
        };
        let nu = [1.0, -1.0];
        rkf_step(&mut s, &Matrix::identity(2), &mbar, &[0.0, 0.0], &nu).unwrap();
        assert!((s.a[0] - 2.0).abs() < 1e-9 && (s.a[1] + 1.0).abs() < 1e-9);
        assert!((s.b[(0, 0)] - 2.0).abs() < 1e-9 && (s.b[(1, 0)] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_credit_gives_zero_gradient() {
        let mut s = RKronState::init(2, 3, &mut rng::stream(5, Stream::LearnerInit));
        let mbar = ImmediateInfluence {
            phi_prime: alloc::vec![0.5, 0.9],
            a_hat: alloc::vec![0.1, 0.2, 1.0],
            alpha: 1.0,
        };
        let dw = rkf_step(&mut s, &Matrix::identity(2), &mbar, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!(dw.max_abs() == 0.0);
    }
}
