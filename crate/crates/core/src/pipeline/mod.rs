//! Multi-run annotation experiments, their on-disk formats, and reports.
//!
//! An experiment directory holds:
//!
//! - `run_records.csv`: one row per (run, review, variable), preceded by a
//!   version comment line.
//! - `responses.jsonl`: every raw completion, including parse retries.
//! - `manifest.json`: review order, variables, provider settings and whether
//!   the experiment finished.
//!
//! Reports are written next to them as JSON plus an aligned text table.

mod annotate;
mod config;
mod experts;
mod records;
mod report;
mod reviews;
mod sweep;

use std::path::PathBuf;

use thiserror::Error;

use crate::gateway::GatewayError;
use crate::metrics::MetricsError;
use crate::model::ModelError;
use crate::prompt::PromptError;

pub use annotate::{annotate, annotate_reviews, draw_index, persist_outcome, AnnotateOutcome, Clock};
pub use config::{load_prompt_spec, ExperimentConfig, DEFAULT_PARSE_RETRY_LIMIT, DEFAULT_RUNS, STUDY_ONE_RUNS};
pub use experts::{
    compare_experts, load_annotations, load_llm_annotations, mode_export, render_agreement_text,
    write_agreement_report, write_annotations, ExpertDataset, AGREEMENT_JSON, AGREEMENT_TXT, ANNOTATIONS_HEADER,
};
pub use records::{
    load_experiment, load_matrix, matrix_to_records, read_run_records, records_to_matrix, save_matrix,
    write_run_records, Manifest, RawResponse, RunRecord, MANIFEST_FILE, RECORDS_FILE, RECORDS_HEADER,
    RESPONSES_FILE,
};
pub use report::{
    consistency_report, render_consistency_text, write_consistency_report, ConsistencyReport,
    VariableConsistency, CONSISTENCY_JSON, CONSISTENCY_TXT,
};
pub use reviews::load_reviews;
pub use sweep::{
    render_sweep_text, sweep_dir, temperature_sweep, write_sweep_report, ModeShift, SweepReport, SWEEP_JSON, SWEEP_TXT,
};

/// Process exit codes used by the command-line tool.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const PROVIDER: i32 = 2;
    pub const INCOMPLETE: i32 = 3;
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Format { path: PathBuf, detail: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("provider failure: {0}")]
    Provider(#[from] GatewayError),
    #[error("incomplete data: {0}")]
    Incomplete(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Provider(_) => exit::PROVIDER,
            PipelineError::Incomplete(_) => exit::INCOMPLETE,
            _ => exit::USAGE,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, detail: impl ToString) -> Self {
        PipelineError::Format {
            path: path.into(),
            detail: detail.to_string(),
        }
    }
}

pub(crate) fn read_text(path: &std::path::Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))
}

pub(crate) fn write_text(path: &std::path::Path, text: &str) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| PipelineError::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| PipelineError::io(path, e))
}

pub(crate) fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}
