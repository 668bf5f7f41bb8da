use std::path::PathBuf;

use kgatlas_core::extraction::ExtractError;
use kgatlas_core::graph::GraphError;
use kgatlas_core::ingest::IngestError;
use kgatlas_core::layout::LayoutError;
use kgatlas_core::model::ModelError;
use kgatlas_core::preprocess::PreprocessError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    In { path: PathBuf, source: Box<CliError> },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("invalid graph export: {0}")]
    Export(String),
    #[error("server failed: {0}")]
    Serve(std::io::Error),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "E_IO",
            CliError::In { source, .. } => source.code(),
            CliError::Usage(_) => "E_USAGE",
            CliError::Config(_) => "E_CONFIG",
            CliError::Export(_) => "E_INVALID_EXPORT",
            CliError::Serve(_) => "E_SERVE",
            CliError::Ingest(e) => e.code(),
            CliError::Model(e) => e.code(),
            CliError::Preprocess(e) => e.code(),
            CliError::Graph(e) => e.code(),
            CliError::Layout(e) => e.code(),
            CliError::Extract(e) => e.code(),
        }
    }

    /// 2 for problems with the invocation itself, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::In { source, .. } => source.exit_code(),
            _ => 1,
        }
    }

    pub fn within(self, path: impl Into<PathBuf>) -> CliError {
        CliError::In {
            path: path.into(),
            source: Box::new(self),
        }
    }
}
