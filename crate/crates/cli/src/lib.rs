//! Experiment orchestration for `rqc-peps`: configuration, instance
//! generation, PEPS and oracle runs, report files, fits and plot tables.

use std::path::{Path, PathBuf};

use rqc_peps::analysis::AnalysisError;
use rqc_peps::circuit::CircuitError;
use rqc_peps::oracle::OracleError;
use rqc_peps::peps::PepsError;
use thiserror::Error;

pub mod config;
pub mod experiment;
pub mod report;
pub mod table;

pub use config::RunConfig;
pub use experiment::{run_experiment, run_job, JobReport, Manifest};
pub use report::{analyze, emit_plot_data, load_reports, PlotKind};
pub use table::Table;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed table: {0}")]
    Table(String),
    #[error("malformed manifest: {0}")]
    Manifest(String),
    #[error("nothing to emit: {0}")]
    EmptyOutput(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Peps(#[from] PepsError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    Threads(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    /// Stable identifier for the error record.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Io { .. } => "io",
            Self::Table(_) => "table",
            Self::Manifest(_) => "manifest",
            Self::EmptyOutput(_) => "empty_output",
            Self::Circuit(_) => "circuit",
            Self::Peps(_) => "peps",
            Self::Oracle(_) => "oracle",
            Self::Analysis(_) => "analysis",
            Self::Json(_) => "json",
            Self::Threads(_) => "threads",
        }
    }

    /// One-line JSON error record.
    pub fn to_record(&self) -> String {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}
