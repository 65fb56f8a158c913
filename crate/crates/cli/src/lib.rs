//! Command-line front end: JSON flow documents, verification, F-distances and CSV reports.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 for usage,
//! parse and input errors.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod document;
pub mod error;

pub use args::Cli;
pub use commands::{run, Outcome};
pub use document::{load_flow, FlowDocument};
pub use error::CliError;

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "METRICFLOW_THREADS";

/// Sizes the global rayon pool from `METRICFLOW_THREADS`, if set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV}={raw:?} must be a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))
}
