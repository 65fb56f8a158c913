//! Subcommand implementations. Human-readable output goes to the given writer;
//! each returns whether its checks passed.

mod distance;
mod generate;
mod report;
mod verify;

use std::io::Write;
use std::path::Path;

use metricflow::flow::{conj_backward, ConjHeatFlowField, MetricFlow};
use metricflow::ot::ProbMeasure;
use serde::Serialize;

pub use distance::{distance, triangle};
pub use generate::{generate, generated_flow};
pub use report::report;
pub use verify::verify;

use crate::args::{Cli, Command, Start};
use crate::error::CliError;

/// Verdict of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    pub fn from_passed(passed: bool) -> Self {
        if passed {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::Fail => 1,
        }
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Generate { kind } => generate(kind, out),
        Command::Verify(a) => verify(a, out),
        Command::Distance(a) => distance(a, out),
        Command::Triangle(a) => triangle(a, out),
        Command::Report(a) => report(a, out),
    }
}

pub(crate) fn io_err(path: &str) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_owned(), source }
}

pub(crate) fn start_measure(flow: &MetricFlow, start: Start) -> Result<ProbMeasure, CliError> {
    let n = flow.slice(flow.n_times() - 1).len();
    match start {
        Start::Uniform => Ok(ProbMeasure::uniform(n)),
        Start::Point(i) if i < n => Ok(ProbMeasure::dirac(n, i)),
        Start::Point(i) => Err(CliError::Usage(format!("point {i} does not exist; the final slice has {n} points"))),
    }
}

/// Conjugate heat flow from `start` at the final grid time.
pub(crate) fn conj_from_top(flow: &MetricFlow, start: Start) -> Result<ConjHeatFlowField, CliError> {
    Ok(conj_backward(flow, flow.n_times() - 1, &start_measure(flow, start)?)?)
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json { path: path.display().to_string(), source })?;
    std::fs::write(path, text + "\n").map_err(io_err(&path.display().to_string()))
}
