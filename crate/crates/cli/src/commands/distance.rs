use std::io::Write;
use std::path::Path;

use metricflow::correspondence::{
    build_union_correspondence, combine_correspondences, f_distance_within, f_triangle_check, gw1_upper_bound,
    identity_correspondence, Correspondence, EMode, FDistanceReport, FlowPair, GwMode, Relation,
};
use metricflow::flow::{ConjHeatFlowField, MetricFlow};
use serde::Deserialize;

use super::{conj_from_top, io_err, write_json, Outcome};
use crate::args::{DistanceArgs, EModeArg, FDistanceOptions, TriangleArgs};
use crate::document::load_flow;
use crate::error::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RelationEntry {
    time: f64,
    pairs: Vec<(usize, usize)>,
}

fn e_mode(m: EModeArg) -> EMode {
    match m {
        EModeArg::Empty => EMode::Empty,
        EModeArg::Exhaustive => EMode::Exhaustive,
        EModeArg::Greedy => EMode::Greedy,
    }
}

fn common_times(f1: &MetricFlow, f2: &MetricFlow) -> Result<Vec<f64>, CliError> {
    let times: Vec<f64> = f1.grid().times().iter().copied().filter(|&t| f2.grid().index_of(t).is_some()).collect();
    if times.is_empty() {
        return Err(metricflow::Error::GridMismatch("the flows share no grid time".into()).into());
    }
    Ok(times)
}

fn check_j(j: &[f64], times: &[f64]) -> Result<(), CliError> {
    match j.iter().find(|t| !times.contains(t)) {
        Some(t) => Err(metricflow::Error::GridMismatch(format!("J time {t} is not on both grids")).into()),
        None => Ok(()),
    }
}

fn read_relations(path: &Path) -> Result<Vec<(f64, Relation)>, CliError> {
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(io_err(&name))?;
    let entries: Vec<RelationEntry> = serde_json::from_str(&text).map_err(|source| CliError::Json { path: name, source })?;
    Ok(entries.into_iter().map(|e| (e.time, e.pairs)).collect())
}

/// Per common time, the matching with the smallest Gromov-W1 bound between the slices.
fn exhaustive_relations(
    f1: &MetricFlow,
    f2: &MetricFlow,
    mu1: &ConjHeatFlowField,
    mu2: &ConjHeatFlowField,
    times: &[f64],
) -> Result<Vec<(f64, Relation)>, CliError> {
    times
        .iter()
        .map(|&t| {
            let (a, b) = (f1.grid().index_of(t).expect("common"), f2.grid().index_of(t).expect("common"));
            let m1 = mu1.at(a).expect("defined below the final time");
            let m2 = mu2.at(b).expect("defined below the final time");
            let bound = gw1_upper_bound(f1.slice(a), f2.slice(b), m1, m2, &GwMode::Exhaustive)?;
            Ok((t, bound.relation))
        })
        .collect()
}

fn summary(r: &FDistanceReport) -> String {
    let worst = r.per_pair_integrals.iter().max_by(|a, b| a.value.total_cmp(&b.value));
    let worst = worst.map_or_else(|| "none".to_string(), |p| format!("({}, {})", p.s, p.t));
    format!(
        "r = {}  |E| = {}  E = {:?}  worst (s, t) = {worst}  certified = {}{}",
        r.r,
        r.e_measure,
        r.exceptional_times,
        r.certified(),
        if r.upper_bound_only { "  (greedy upper bound)" } else { "" }
    )
}

fn finish(report: &FDistanceReport, opts: &FDistanceOptions, out: &mut dyn Write) -> Result<Outcome, CliError> {
    writeln!(out, "{}", summary(report)).map_err(io_err("<stdout>"))?;
    for v in &report.violations {
        writeln!(out, "violation: {v}").map_err(io_err("<stdout>"))?;
    }
    if let Some(p) = &opts.json {
        write_json(p, report)?;
    }
    Ok(Outcome::from_passed(report.certified()))
}

pub fn distance(a: &DistanceArgs, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let (f1, f2) = (load_flow(&a.first)?, load_flow(&a.second)?);
    let times = common_times(&f1, &f2)?;
    check_j(&a.options.j, &times)?;
    let mu1 = conj_from_top(&f1, a.options.start)?;
    let mu2 = conj_from_top(&f2, a.options.start)?;
    let corr: Correspondence = if let Some(p) = &a.relation {
        build_union_correspondence(&f1, &f2, &read_relations(p)?)?.0
    } else if a.exhaustive {
        build_union_correspondence(&f1, &f2, &exhaustive_relations(&f1, &f2, &mu1, &mu2, &times)?)?.0
    } else {
        identity_correspondence(&f1, &f2)?.0
    };
    let report = f_distance_within(
        &corr,
        FlowPair { flow: &f1, mu: &mu1 },
        FlowPair { flow: &f2, mu: &mu2 },
        &a.options.j,
        e_mode(a.options.e_mode),
    )?;
    finish(&report, &a.options, out)
}

pub fn triangle(a: &TriangleArgs, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let flows = [load_flow(&a.first)?, load_flow(&a.second)?, load_flow(&a.third)?];
    let (c12, _) = identity_correspondence(&flows[0], &flows[1])?;
    let (c23, _) = identity_correspondence(&flows[1], &flows[2])?;
    let c = combine_correspondences(&c12, &c23)?;
    check_j(&a.options.j, &c.times)?;
    let mus = flows.iter().map(|f| conj_from_top(f, a.options.start)).collect::<Result<Vec<_>, _>>()?;
    let pairs = [0, 1, 2].map(|i| FlowPair { flow: &flows[i], mu: &mus[i] });
    let rep = f_triangle_check(&c, pairs, &a.options.j, e_mode(a.options.e_mode))?;
    writeln!(
        out,
        "d12 = {}  d23 = {}  d13 = {}  d13 <= d12 + d23: {}  glued certificate: {} (value {})",
        rep.d12, rep.d23, rep.d13, rep.holds, rep.glued_certificate_ok, rep.glued_value
    )
    .map_err(io_err("<stdout>"))?;
    if let Some(p) = &a.options.json {
        write_json(p, &rep)?;
    }
    Ok(Outcome::from_passed(rep.holds && rep.glued_certificate_ok))
}
