//! Training harness, analyses and file outputs for the online-learning
//! algorithms in `online-rnn-core`.

pub mod analysis;
pub mod config;
pub mod error;
pub mod io;
pub mod smooth;
pub mod train;

pub use config::{Algorithm, RunConfig, TaskKind};
pub use error::{HarnessError, Result};
