use std::path::{Path, PathBuf};

use online_rnn_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(
        "training diverged at step {step}: loss {loss}, |W| {w_norm:.4e}, |Wout| {w_out_norm:.4e}, \
         {learner} state norm {learner_norm:.4e}"
    )]
    Diverged {
        step: usize,
        loss: f64,
        w_norm: f64,
        w_out_norm: f64,
        learner: &'static str,
        learner_norm: f64,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("degenerate statistic: {0}")]
    Degenerate(&'static str),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
