//! Past-facing approximations to RTRL. Each compresses the influence tensor
//! `M[k,i,j]` into `O(n²)` numbers.

mod kernl;
mod kfrtrl;
mod rflo;
mod rkf;
mod uoro;

pub use kernl::{advance_noise_traces, kernl_meta_update, kernl_step, Kernl, KernlConfig, KernlState, MetaOutcome};
pub use kfrtrl::{kfrtrl_step, KfRtrl, KronState};
pub use rflo::{rflo_step, Rflo, RfloTrace};
pub use rkf::{rkf_step, RKronState, RkfRtrl};
pub use uoro::{uoro_step, Rank1State, Uoro};

use crate::linalg::Matrix;

/// Added to every norm inside a ρ ratio.
pub const RHO_EPS: f64 = 1e-10;

/// `sqrt((num + ε) / (den + ε))`
#[inline]
pub fn balance(num: f64, den: f64) -> f64 {
    libm::sqrt((num + RHO_EPS) / (den + RHO_EPS))
}

/// UORO's variance-balancing scales `(ρ₀, ρ₁)` from `‖B_prev‖`, `‖J A_prev‖`,
/// `‖νᵀM̄‖` and `‖ν‖`.
pub fn uoro_rho(b_prev_norm: f64, ja_norm: f64, contraction_norm: f64, nu_norm: f64) -> (f64, f64) {
    (balance(b_prev_norm, ja_norm), balance(contraction_norm, nu_norm))
}

/// A learner whose state implies a dense estimate of `M` (`n × n·m`, column
/// `i·m + j`).
pub trait InfluenceEstimate {
    fn influence_estimate(&self) -> Matrix;
}

/// Rolls `c̄ M` (`M` dense `n × n·m`) into `n × m`.
pub fn project_credit(credit: &[f64], influence: &Matrix, m: usize) -> Matrix {
    let n = credit.len();
    Matrix::from_vec(n, m, influence.vec_mul(credit))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_norms_give_unit_rho() {
        let (r0, r1) = uoro_rho(3.0, 3.0, 0.5, 0.5);
        assert!((r0 - 1.0).abs() < 1e-15);
        assert!((r1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rho_follows_square_root_ratio() {
        let (r0, _) = uoro_rho(4.0, 1.0, 1.0, 1.0);
        assert!((r0 - 2.0).abs() < 1e-9);
    }

    #[test]
    fn zero_norms_fall_back_to_one() {
        let (r0, r1) = uoro_rho(0.0, 0.0, 0.0, 0.0);
        assert_eq!((r0, r1), (1.0, 1.0));
        assert!(balance(0.0, 1.0) > 0.0);
    }
}
