//! Pipeline orchestration behind the `netpen` binary: dataset runs,
//! metric evaluation with the sliding-window smoothing filter, and
//! plot-ready CSV export.

pub mod config;
pub mod evaluate;
pub mod pipeline;
pub mod report;
pub mod smooth;

pub use config::PipelineConfig;
pub use evaluate::{evaluate, Metrics};
pub use pipeline::run_pipeline;
pub use report::{FrameRecord, RunReport, StageTimings, Summary};
pub use smooth::smooth;

use std::path::PathBuf;

use thiserror::Error;

/// Pipeline failure classes; each maps to a distinct process exit code.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("runtime failure: {0}")]
    Runtime(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// Exit-code contract: 0 success, 2 configuration error, 3 dataset
    /// error, 4 runtime failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Dataset(_) => 3,
            PipelineError::Runtime(_) | PipelineError::Io { .. } => 4,
        }
    }
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}
