//! Seeded end-to-end runs, sweeps, persistence and reports.

pub mod artifacts;
pub mod config;
pub mod report;
pub mod run;

pub use artifacts::{read_raw, write_raw, RawRecord};
pub use config::RunConfig;
pub use report::{render_report, report, ReportOutcome};
pub use run::{
    analyze_quadratures, analyze_sidebands, Backend, run_point, run_single, run_sweep_ratio_vs_s,
    run_sweep_variance_vs_tone_ratio, Paths, PointOutcome, RunKind, RunOutput,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{stage} failed: {message}")]
    Stage { stage: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl PipelineError {
    pub fn stage(stage: &str, e: impl std::fmt::Display) -> Self {
        PipelineError::Stage {
            stage: stage.to_string(),
            message: e.to_string(),
        }
    }

    /// Process exit status for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Stage { .. } | PipelineError::Io(_) => 3,
        }
    }
}

impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        PipelineError::Io(e.to_string())
    }
}
