use std::path::PathBuf;

use thiserror::Error;
use xray_pose::codec::CodecError;
use xray_pose::metrics::MetricsError;
use xray_pose::pipeline::PipelineError;
use xray_pose::pnp::PnpError;
use xray_pose::sim::SimError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } | CliError::Data { .. } => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub(crate) fn data(path: impl Into<PathBuf>, message: impl ToString) -> CliError {
        CliError::Data { path: path.into(), message: message.to_string() }
    }

    /// Attributes a library error to `path`.
    pub(crate) fn sim(path: impl Into<PathBuf>) -> impl FnOnce(SimError) -> CliError {
        let path = path.into();
        move |e| match e {
            SimError::InvalidRanges(_) | SimError::EmptyLattice | SimError::Infeasible { .. } => {
                CliError::Config(e.to_string())
            }
            SimError::Pnp(p) => p.into(),
            SimError::Io(source) => CliError::Io { path, source },
            other => CliError::data(path, other),
        }
    }

    pub(crate) fn codec(path: impl Into<PathBuf>) -> impl FnOnce(CodecError) -> CliError {
        let path = path.into();
        move |e| match e {
            CodecError::Io(source) => CliError::Io { path, source },
            other => CliError::data(path, other),
        }
    }
}

impl From<PnpError> for CliError {
    fn from(e: PnpError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Numerical(e.to_string())
    }
}
