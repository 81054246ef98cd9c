use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("core: {0}")]
    Core(#[from] deepcov_core::Error),
    #[error("io ({path}): {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv ({path}): {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("config: {0}")]
    Config(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn csv(path: impl Into<PathBuf>) -> impl FnOnce(csv::Error) -> Self {
        let path = path.into();
        move |source| CliError::Csv { path, source }
    }

    /// Stable machine-readable category for the error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(deepcov_core::Error::InvalidArgument(_)) => "invalid-argument",
            CliError::Core(deepcov_core::Error::DimensionMismatch(_)) => "dimension-mismatch",
            CliError::Core(deepcov_core::Error::NumericalDomain(_)) => "numerical-domain",
            CliError::Core(deepcov_core::Error::Divergence(_)) => "divergence",
            CliError::Io { .. } => "io",
            CliError::Csv { .. } => "csv",
            CliError::Config(_) => "config",
            CliError::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
