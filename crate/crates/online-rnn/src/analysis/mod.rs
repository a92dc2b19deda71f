//! Gradient alignment, memory traces, correlation statistics and the
//! gradient-correctness oracles.

pub mod alignment;
pub mod gradcheck;
pub mod memtrace;
pub mod stats;
