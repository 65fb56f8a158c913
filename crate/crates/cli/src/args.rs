//! Command-line grammar.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "metricflow", version, about = "Build, verify and compare discrete metric flows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a generated flow as a JSON document.
    Generate {
        #[command(subcommand)]
        kind: GenerateKind,
    },
    /// Check the flow axioms, H-concentration and the monotonicity suites.
    Verify(VerifyArgs),
    /// F-distance between two flows within a correspondence.
    Distance(DistanceArgs),
    /// Triangle inequality for the F-distance over three flows.
    Triangle(TriangleArgs),
    /// Write a curve of one quantity as CSV.
    Report(ReportArgs),
}

/// `auto` or a number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AutoOr {
    Auto,
    Value(f64),
}

pub fn parse_auto_or(s: &str) -> Result<AutoOr, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(AutoOr::Auto);
    }
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(AutoOr::Value)
        .ok_or_else(|| format!("expected \"auto\" or a finite number, got {s:?}"))
}

/// Final-time measure of a conjugate heat flow: `uniform` or a point index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Start {
    Uniform,
    Point(usize),
}

pub fn parse_start(s: &str) -> Result<Start, String> {
    if s.eq_ignore_ascii_case("uniform") {
        return Ok(Start::Uniform);
    }
    s.parse::<usize>().map(Start::Point).map_err(|_| format!("expected \"uniform\" or a point index, got {s:?}"))
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub t0: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub t1: f64,
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Graph {
    Complete,
    Path,
}

#[derive(Debug, Subcommand)]
pub enum GenerateKind {
    /// Two points at distance D mixing at rate C/D².
    TwoPoint {
        /// `auto` picks the smallest verified constant times (1 + 1e-6).
        #[arg(long = "C", value_parser = parse_auto_or, default_value = "auto")]
        c: AutoOr,
        #[arg(long = "D", default_value_t = 1.0, allow_negative_numbers = true)]
        d: f64,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Heat kernel sampled on a lattice in [-L, L]^dim.
    Gaussian {
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long = "L", default_value_t = 8.0)]
        half_width: f64,
        #[arg(long = "h", default_value_t = 0.25)]
        spacing: f64,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Continuous-time random walk on a fixed graph.
    Static {
        #[arg(long, value_enum, default_value_t = Graph::Complete)]
        graph: Graph,
        #[arg(long, default_value_t = 3)]
        points: usize,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        /// Edge length.
        #[arg(long, default_value_t = 1.0)]
        spacing: f64,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Cartesian product of two flows on the same grid.
    Product {
        first: PathBuf,
        second: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckMode {
    /// Complete sweep on two-point slices, randomized battery elsewhere.
    Exhaustive,
    Randomized,
    /// Skip the gradient axiom.
    Skip,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub file: PathBuf,
    #[arg(long, value_enum, default_value_t = CheckMode::Exhaustive)]
    pub mode: CheckMode,
    /// Sweep step of the exhaustive two-point check.
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
    /// Random test functions per time pair.
    #[arg(long, default_value_t = 256)]
    pub seeds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Concentration constant; `auto` uses the computed one.
    #[arg(long = "H", value_parser = parse_auto_or, default_value = "auto")]
    pub h: AutoOr,
    /// Also write the machine-readable report here.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EModeArg {
    Empty,
    Exhaustive,
    Greedy,
}

#[derive(Debug, Clone, Args)]
pub struct FDistanceOptions {
    /// Times that may not be exceptional.
    #[arg(long = "J", value_delimiter = ',', allow_negative_numbers = true)]
    pub j: Vec<f64>,
    #[arg(long = "E-mode", value_enum, default_value_t = EModeArg::Exhaustive)]
    pub e_mode: EModeArg,
    /// Final-time measure of each conjugate heat flow.
    #[arg(long, value_parser = parse_start, default_value = "uniform")]
    pub start: Start,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DistanceArgs {
    pub first: PathBuf,
    pub second: PathBuf,
    /// JSON list of `{"time": t, "pairs": [[i, j], ...]}`; identity relations otherwise.
    #[arg(long, conflicts_with = "exhaustive")]
    pub relation: Option<PathBuf>,
    /// Per time, the injective matching with the smallest Gromov-W1 bound.
    #[arg(long)]
    pub exhaustive: bool,
    #[command(flatten)]
    pub options: FDistanceOptions,
}

#[derive(Debug, Args)]
pub struct TriangleArgs {
    pub first: PathBuf,
    pub second: PathBuf,
    pub third: PathBuf,
    #[command(flatten)]
    pub options: FDistanceOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    /// `Var(μ¹_t, μ²_t)` and `Var + Ht` per grid time.
    VarCurve,
    /// `d_W1(μ¹_t, μ²_t)` per grid time.
    #[value(name = "dW1-curve")]
    DW1Curve,
    /// `b_r(ε)` at one time for sampled `ε`.
    BFunction,
    /// `∫∫d_t dμ_t dμ_t` with its bounds relative to the first time.
    DIntegral,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub file: PathBuf,
    #[arg(long, value_enum)]
    pub quantity: Quantity,
    /// Output file; stdout otherwise.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long = "H", value_parser = parse_auto_or, default_value = "auto")]
    pub h: AutoOr,
    /// Final-time measure of the first conjugate heat flow.
    #[arg(long, value_parser = parse_start, default_value = "0")]
    pub start1: Start,
    /// Final-time measure of the second one; the last point by default.
    #[arg(long, value_parser = parse_start)]
    pub start2: Option<Start>,
    /// Scale `r` of the mass distribution function.
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// Grid time of the mass distribution function; the final time by default.
    #[arg(long, allow_negative_numbers = true)]
    pub time: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub eps_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eps_max: f64,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
}
