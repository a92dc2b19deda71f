//! Seeded random streams.
//!
//! A run derives independent sub-streams from one master seed so that, for
//! example, switching the learning algorithm never perturbs the task stream.

use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::linalg::Matrix;

pub type SimRng = ChaCha8Rng;

/// Well-known sub-stream ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Weights = 0,
    Task = 1,
    LearnerInit = 2,
    LearnerNoise = 3,
    Analysis = 4,
    /// Weights of a task's generating network.
    Target = 5,
}

pub fn stream(seed: u64, which: Stream) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// `N(0, std²)` draw. `std` is a standard deviation.
pub fn gaussian<R: Rng + ?Sized>(rng: &mut R, std: f64) -> f64 {
    if std == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, std)
        .expect("standard deviation must be finite and non-negative")
        .sample(rng)
}

pub fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, len: usize, std: f64) -> Vec<f64> {
    (0..len).map(|_| gaussian(rng, std)).collect()
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, std: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| gaussian(rng, std))
}

/// i.i.d. uniform signs in `{-1, +1}`.
pub fn sign_vec<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len)
        .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
        .collect()
}

/// Haar-random orthogonal `n × n` matrix.
pub fn orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    let mut m = gaussian_matrix(rng, n, n, 1.0);
    crate::linalg::orthonormalize_columns(&mut m);
    m
}
