use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use basinplan_core::basin::BasinError;
use basinplan_core::engineering::EngineeringError;
use basinplan_core::hydrology::HydrologyError;
use basinplan_core::metrics::MetricsError;
use basinplan_core::optimizer::OptimizerError;
use basinplan_core::pipeline::PipelineError;
use basinplan_core::screening::ScreeningError;
use basinplan_core::synthetic::SyntheticError;

#[derive(Debug, Error)]
pub enum WbError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed {what}: {message}")]
    Format { what: String, message: String },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("store: {0}")]
    Store(String),
    #[error(transparent)]
    Basin(#[from] BasinError),
    #[error(transparent)]
    Hydrology(#[from] HydrologyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Engineering(#[from] EngineeringError),
    #[error(transparent)]
    Screening(#[from] ScreeningError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Synthetic(#[from] SyntheticError),
}

/// What a failed command or request reports.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ErrorDoc {
    /// Always "error".
    pub status: String,
    pub kind: String,
    pub message: String,
}

impl WbError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        WbError::Io { path: path.display().to_string(), message: e.to_string() }
    }

    pub fn format(what: &str, e: impl std::fmt::Display) -> Self {
        WbError::Format { what: what.into(), message: e.to_string() }
    }

    /// Module that raised the error.
    pub fn kind(&self) -> &'static str {
        match self {
            WbError::Config(_) => "config",
            WbError::Io { .. } => "io",
            WbError::Format { .. } => "format",
            WbError::NotFound(_) => "not-found",
            WbError::Store(_) => "store",
            WbError::Basin(_) => "basin",
            WbError::Hydrology(_) => "hydrology",
            WbError::Metrics(_) => "metrics",
            WbError::Engineering(_) => "engineering",
            WbError::Screening(_) => "screening",
            WbError::Pipeline(_) => "pipeline",
            WbError::Optimizer(_) => "optimizer",
            WbError::Synthetic(_) => "synthetic",
        }
    }

    /// Input problems as opposed to failures of the machinery.
    pub fn is_validation(&self) -> bool {
        match self {
            WbError::Optimizer(e) => !matches!(e, OptimizerError::Numerical(_) | OptimizerError::Lp(_)),
            WbError::Io { .. } | WbError::Store(_) | WbError::NotFound(_) => false,
            _ => true,
        }
    }

    pub fn doc(&self) -> ErrorDoc {
        ErrorDoc { status: "error".into(), kind: self.kind().into(), message: self.to_string() }
    }
}
