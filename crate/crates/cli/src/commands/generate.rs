use std::io::Write;

use metricflow::flow::{cartesian_product_flow, MetricFlow, TimeGrid};
use metricflow::generators::{
    complete_graph_semigroup, gaussian_flow_discrete, generator_semigroup, min_c, path_generator, static_flow,
    two_point_flow,
};
use metricflow::ot::FiniteMetricSpace;
use ndarray::Array2;

use super::{io_err, Outcome};
use crate::args::{AutoOr, GenerateKind, Graph, GridArgs};
use crate::document::{load_flow, FlowDocument};
use crate::error::CliError;

/// Relative margin above the smallest verified constant used by `--C auto`.
pub const AUTO_C_MARGIN: f64 = 1e-6;

fn grid(g: &GridArgs) -> Result<TimeGrid, CliError> {
    if g.steps == 0 || !(g.t1 > g.t0) {
        return Err(CliError::Usage(format!("need t0 < t1 and at least one step (got {}, {}, {})", g.t0, g.t1, g.steps)));
    }
    Ok(TimeGrid::uniform(g.t0, g.t1, g.steps)?)
}

fn discrete_space(m: usize, d: f64) -> Result<FiniteMetricSpace, CliError> {
    let dist = Array2::from_shape_fn((m, m), |(i, j)| if i == j { 0.0 } else { d });
    Ok(FiniteMetricSpace::from_dist(dist)?)
}

/// The flow described by `kind`.
pub fn generated_flow(kind: &GenerateKind) -> Result<MetricFlow, CliError> {
    let flow = match kind {
        GenerateKind::TwoPoint { c, d, grid: g, .. } => {
            let c_min = min_c();
            let c = match *c {
                AutoOr::Auto => c_min * (1.0 + AUTO_C_MARGIN),
                AutoOr::Value(v) => v,
            };
            if !(*d > 0.0) || !(c > 0.0) {
                return Err(CliError::Usage(format!("two-point flow needs C > 0 and D > 0 (got C = {c}, D = {d})")));
            }
            two_point_flow(c, *d, grid(g)?)?.with_tag("C_min", c_min)
        }
        GenerateKind::Gaussian { dim, half_width, spacing, grid: g, .. } => {
            let (flow, side) = gaussian_flow_discrete(*dim, *half_width, *spacing, grid(g)?)?;
            flow.with_tag("reproduction_residual", side.reproduction_residual)
                .with_tag("truncation_warning", side.truncation_warning)
        }
        GenerateKind::Static { graph, points, kappa, spacing, grid: g, .. } => {
            if *points == 0 || !(*kappa > 0.0) || !(*spacing > 0.0) {
                return Err(CliError::Usage("static flow needs points ≥ 1, kappa > 0 and spacing > 0".into()));
            }
            let flow = match graph {
                Graph::Complete => static_flow(discrete_space(*points, *spacing)?, complete_graph_semigroup(*points, *kappa), grid(g)?)?,
                Graph::Path => static_flow(
                    FiniteMetricSpace::line(*points, *spacing)?,
                    generator_semigroup(&path_generator(*points, *kappa))?,
                    grid(g)?,
                )?,
            };
            flow.with_tag("generator", format!("static-{graph:?}").to_lowercase())
                .with_tag("points", points)
                .with_tag("kappa", kappa)
                .with_tag("spacing", spacing)
        }
        GenerateKind::Product { first, second, .. } => {
            let (a, b) = (load_flow(first)?, load_flow(second)?);
            cartesian_product_flow(&a, &b)?
                .with_tag("generator", "product")
                .with_tag("first", first.display())
                .with_tag("second", second.display())
        }
    };
    Ok(flow)
}

pub fn generate(kind: &GenerateKind, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let flow = generated_flow(kind)?;
    let path = match kind {
        GenerateKind::TwoPoint { out, .. }
        | GenerateKind::Gaussian { out, .. }
        | GenerateKind::Static { out, .. }
        | GenerateKind::Product { out, .. } => out.as_deref(),
    };
    let doc = FlowDocument::from_flow(&flow);
    let tags: Vec<String> = flow.tags.iter().map(|(k, v)| format!("{k}={v}")).collect();
    match path {
        Some(p) => {
            doc.write(Some(p))?;
            writeln!(out, "wrote {} ({} times): {}", p.display(), flow.n_times(), tags.join(" ")).map_err(io_err("<stdout>"))?;
        }
        None => {
            writeln!(out, "{}", doc.to_json()).map_err(io_err("<stdout>"))?;
            eprintln!("generated {} times: {}", flow.n_times(), tags.join(" "));
        }
    }
    Ok(Outcome::Pass)
}
