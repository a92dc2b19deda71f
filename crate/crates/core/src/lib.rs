//! Online gradient algorithms for time-continuous vanilla RNNs.
//!
//! Every learner in this crate consumes the same per-step quantities produced
//! by [`rnn::step`]: the cached forward pass, the Jacobian `J = ∂a(t)/∂a(t-1)`
//! and the immediate credit `c̄ = ∂L(t)/∂a(t)`. Past-facing learners
//! ([`exact::Rtrl`] and the compressions in [`approx`]) carry some form of the
//! influence tensor `M[k,i,j] = ∂a_k/∂W_ij` forward in time. Future-facing
//! learners ([`exact::FBptt`], [`exact::EBptt`], [`future::Dni`]) either replay
//! a bounded window of the past or predict the credit assignment vector.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and the
//! training harness live in the `online-rnn` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod approx;
pub mod error;
pub mod exact;
pub mod future;
pub mod learner;
pub mod linalg;
pub mod rng;
pub mod rnn;
pub mod tasks;

pub use error::{Error, Result};
pub use learner::{Learner, StepContext};
pub use linalg::Matrix;
pub use rnn::{Gradient, ImmediateInfluence, RnnConfig, RnnParams, RnnState, StepCache};
