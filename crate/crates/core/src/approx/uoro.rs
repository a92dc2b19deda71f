//! Unbiased Online Recurrent Optimization: `M[k,i,j] ≈ A_k B_ij`.

use alloc::vec::Vec;

use super::{uoro_rho, InfluenceEstimate};
use crate::error::{check_len, Error, Result};
use crate::learner::{Learner, StepContext};
use crate::linalg::{norm, Matrix};
use crate::rng::{self, SimRng, Stream};
use crate::rnn::{ImmediateInfluence, RnnConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Rank1State {
    /// length `n`
    pub a: Vec<f64>,
    /// `n × m`
    pub b: Matrix,
}

impl Rank1State {
    /// `A ~ N(0, 1)`, `B ~ N(0, 1)`.
    pub fn init<R: rand::Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Self {
        Rank1State {
            a: rng::gaussian_vec(rng, n, 1.0),
            b: rng::gaussian_matrix(rng, n, m, 1.0),
        }
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Rank1State {
            a: alloc::vec![0.0; n],
            b: Matrix::zeros(n, m),
        }
    }
}

impl InfluenceEstimate for Rank1State {
    fn influence_estimate(&self) -> Matrix {
        let flat = self.b.as_slice();
        Matrix::outer(&self.a, flat)
    }
}

/// `A ← ρ₀ J A + ρ₁ ν`, `B ← B / ρ₀ + (νᵀM̄) / ρ₁`; returns `dW = (c̄·A) B`.
pub fn uoro_step(
    state: &mut Rank1State,
    jacobian: &Matrix,
    mbar: &ImmediateInfluence,
    credit: &[f64],
    nu: &[f64],
) -> Result<Matrix> {
    let n = mbar.n();
    check_len("UORO A", n, state.a.len())?;
    check_len("UORO noise", n, nu.len())?;
    check_len("UORO B cols", mbar.m(), state.b.cols())?;

    let ja = jacobian.mul_vec(&state.a);
    let contraction = mbar.contract(nu);
    let (rho0, rho1) = uoro_rho(
        state.b.frobenius_norm(),
        norm(&ja),
        contraction.frobenius_norm(),
        norm(nu),
    );
    state.a = ja.iter().zip(nu).map(|(x, v)| rho0 * x + rho1 * v).collect();
    state.b.scale(1.0 / rho0);
    state.b.add_scaled(1.0 / rho1, &contraction);
    if !(state.b.is_finite() && state.a.iter().all(|x| x.is_finite())) {
        return Err(Error::NonFinite("UORO state"));
    }
    Ok(state.b.scaled(crate::linalg::dot(credit, &state.a)))
}

#[derive(Debug, Clone)]
pub struct Uoro {
    state: Rank1State,
    noise: SimRng,
}

impl Uoro {
    pub fn new(cfg: &RnnConfig, seed: u64) -> Self {
        let mut init = rng::stream(seed, Stream::LearnerInit);
        Uoro {
            state: Rank1State::init(cfg.n, cfg.m(), &mut init),
            noise: rng::stream(seed, Stream::LearnerNoise),
        }
    }

    pub fn state(&self) -> &Rank1State {
        &self.state
    }
}

impl Learner for Uoro {
    fn name(&self) -> &'static str {
        "uoro"
    }

    fn update(&mut self, ctx: &StepContext<'_>) -> Result<Option<Matrix>> {
        let nu = rng::sign_vec(&mut self.noise, ctx.config.n);
        uoro_step(&mut self.state, ctx.jacobian, &ctx.influence(), ctx.credit, &nu).map(Some)
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

    fn influence() -> ImmediateInfluence {
        ImmediateInfluence {
            phi_prime: alloc::vec![0.7, 0.4],
            a_hat: alloc::vec![0.3, -0.2, 1.0],
            alpha: 0.5,
        }
    }

    #[test]
    fn zero_credit_gives_zero_gradient() {
        let mut s = Rank1State::init(2, 3, &mut rng::stream(1, Stream::LearnerInit));
        let dw = uoro_step(&mut s, &Matrix::identity(2), &influence(), &[0.0, 0.0], &[1.0, -1.0]).unwrap();
        assert!(dw.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_history_and_influence_gives_zero_estimate() {
        let mut s = Rank1State::zeros(2, 3);
        let mut mbar = influence();
        mbar.phi_prime = alloc::vec![0.0, 0.0];
        uoro_step(&mut s, &Matrix::identity(2), &mbar, &[1.0, 1.0], &[1.0, -1.0]).unwrap();
        assert!(s.influence_estimate().max_abs() == 0.0);
    }

    #[test]
    fn update_matches_hand_evaluation() {
        // A = (1, 0), B = 0, J = I: ‖B‖ and ‖JA‖ = 1 so ρ₀ ≈ sqrt(ε/(1+ε))
        let mut s = Rank1State {
            a: alloc::vec![1.0, 0.0],
            b: Matrix::zeros(2, 3),
        };
        let mbar = influence();
        let nu = [1.0, -1.0];
        uoro_step(&mut s, &Matrix::identity(2), &mbar, &[1.0, 0.0], &nu).unwrap();
        let rho0 = libm::sqrt(1e-10 / (1.0 + 1e-10));
        let c = mbar.contract(&nu);
        let rho1 = libm::sqrt((c.frobenius_norm() + 1e-10) / (libm::sqrt(2.0) + 1e-10));
        assert!((s.a[0] - (rho0 + rho1)).abs() < 1e-15);
        assert!((s.a[1] + rho1).abs() < 1e-15);
        assert!((s.b[(1, 2)] - c[(1, 2)] / rho1).abs() < 1e-15);
    }
}
