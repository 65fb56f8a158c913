use std::io::Write;

use metricflow::flow::{d_integral, h_concentration_constant, intd_diff_bounds_check, MetricFlow};
use metricflow::ot::{mass_distribution_fn, self_variance, variance, w1_value, ProbMeasure};

use super::{conj_from_top, io_err, Outcome};
use crate::args::{AutoOr, Quantity, ReportArgs, Start};
use crate::document::load_flow;
use crate::error::CliError;

/// Header and rows of one curve.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

fn num(v: f64) -> String {
    // `Display` prints the shortest decimal that reads back to the same double.
    format!("{v}")
}

fn resolve_h(flow: &MetricFlow, h: AutoOr) -> Result<f64, CliError> {
    match h {
        AutoOr::Auto => Ok(h_concentration_constant(flow).h_min),
        AutoOr::Value(v) if v >= 0.0 => Ok(v),
        AutoOr::Value(v) => Err(CliError::Usage(format!("--H {v} must be non-negative"))),
    }
}

pub fn report_table(flow: &MetricFlow, a: &ReportArgs) -> Result<Table, CliError> {
    let n = flow.n_times();
    let last_point = flow.slice(n - 1).len() - 1;
    let mu1 = conj_from_top(flow, a.start1)?;
    let mu2 = conj_from_top(flow, a.start2.unwrap_or(Start::Point(last_point)))?;
    let at = |k: usize| (mu1.at(k).expect("defined"), mu2.at(k).expect("defined"));
    let table = match a.quantity {
        Quantity::VarCurve => {
            let h = resolve_h(flow, a.h)?;
            let rows = (0..n)
                .map(|k| {
                    let (m1, m2) = at(k);
                    let s = flow.slice(k);
                    let v = variance(s, m1, m2)?;
                    Ok(vec![
                        num(flow.time(k)),
                        num(v),
                        num(v + h * flow.time(k)),
                        num(self_variance(s, m1)?),
                        num(self_variance(s, m2)?),
                    ])
                })
                .collect::<Result<_, metricflow::Error>>()?;
            Table { header: vec!["time", "var", "var_plus_ht", "self_var1", "self_var2"], rows }
        }
        Quantity::DW1Curve => {
            let rows = (0..n)
                .map(|k| {
                    let (m1, m2) = at(k);
                    Ok(vec![num(flow.time(k)), num(w1_value(flow.slice(k), m1, m2)?)])
                })
                .collect::<Result<_, metricflow::Error>>()?;
            Table { header: vec!["time", "dw1"], rows }
        }
        Quantity::BFunction => {
            if !(a.r > 0.0) || !(a.eps_min > 0.0) || !(a.eps_max >= a.eps_min) || a.samples < 2 {
                return Err(CliError::Usage("b-function needs r > 0, 0 < eps-min ≤ eps-max and samples ≥ 2".into()));
            }
            let k = match a.time {
                None => n - 1,
                Some(t) => flow.grid().index_of(t).ok_or_else(|| CliError::Usage(format!("time {t} is not on the grid")))?,
            };
            let mu: &ProbMeasure = mu1.at(k).expect("defined");
            let rows = (0..a.samples)
                .map(|i| {
                    let eps = a.eps_min + (a.eps_max - a.eps_min) * i as f64 / (a.samples - 1) as f64;
                    Ok(vec![num(eps), num(mass_distribution_fn(flow.slice(k), mu, a.r, eps)?)])
                })
                .collect::<Result<_, metricflow::Error>>()?;
            Table { header: vec!["eps", "b"], rows }
        }
        Quantity::DIntegral => {
            let h = resolve_h(flow, a.h)?;
            let rows = (0..n)
                .map(|k| {
                    let r = intd_diff_bounds_check(flow, &mu1, h, 0, k)?;
                    Ok(vec![
                        num(flow.time(k)),
                        num(d_integral(flow, &mu1, k)?),
                        num(r.difference),
                        num(r.lower),
                        num(r.upper),
                        r.passed().to_string(),
                    ])
                })
                .collect::<Result<_, metricflow::Error>>()?;
            Table { header: vec!["time", "d_integral", "difference", "lower", "upper", "within_bounds"], rows }
        }
    };
    Ok(table)
}

pub fn write_csv(table: &Table, out: &mut dyn Write) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush().map_err(io_err("<csv>"))?;
    Ok(())
}

pub fn report(a: &ReportArgs, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let flow = load_flow(&a.file)?;
    let table = report_table(&flow, a)?;
    match &a.csv {
        Some(p) => {
            let name = p.display().to_string();
            let mut f = std::fs::File::create(p).map_err(io_err(&name))?;
            write_csv(&table, &mut f)?;
            writeln!(out, "wrote {} rows to {name}", table.rows.len()).map_err(io_err("<stdout>"))?;
        }
        None => write_csv(&table, out)?,
    }
    // The d-integral bounds are checks; the other curves are data only.
    let passed = a.quantity != Quantity::DIntegral || table.rows.iter().all(|r| r.last().is_some_and(|v| v == "true"));
    Ok(Outcome::from_passed(passed))
}
