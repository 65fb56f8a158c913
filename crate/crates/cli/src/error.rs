use thiserror::Error;

/// Failures that end a command before it can report a verdict. All map to exit code 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("cannot access {path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("cannot parse {path}: {source}")]
    Json { path: String, source: serde_json::Error },

    #[error("invalid flow document {path}: {source}")]
    Document { path: String, source: metricflow::Error },

    #[error(transparent)]
    Core(#[from] metricflow::Error),

    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}
