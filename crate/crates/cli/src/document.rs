//! JSON flow documents, `format_version = 1`.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "grid": [0.0, 0.5, 1.0],
//!   "slices": [{ "labels": ["a", "b"], "dist": [0.0, 1.0, 1.0, 0.0] }, ...],
//!   "kernels": { "markov": [[[0.9, 0.1], [0.1, 0.9]], ...] },
//!   "metadata": { "generator": "two-point" }
//! }
//! ```
//!
//! `dist` is row-major. A kernel is a list of rows; row `x` of the kernel
//! for `s < t` is `ν_{x;s}` on `X_s`. Full documents store every pair under
//! the key `"s:t"` (grid indices). Floats are written in shortest round-trip
//! form, so reading a written document reproduces every matrix bit for bit.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use metricflow::flow::{KernelMode, MetricFlow, TimeGrid};
use metricflow::ot::FiniteMetricSpace;
use metricflow::Error as CoreError;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub const FORMAT_VERSION: u32 = 1;

/// Metadata key carrying the `approximate` flag.
pub const APPROXIMATE_KEY: &str = "approximate";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceDoc {
    pub labels: Vec<String>,
    pub dist: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelsDoc {
    /// Adjacent kernels, `K(k, k+1)` at position `k`.
    Markov(Vec<Vec<Vec<f64>>>),
    /// Every pair, keyed `"s:t"`.
    Full(BTreeMap<String, Vec<Vec<f64>>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowDocument {
    pub format_version: u32,
    pub grid: Vec<f64>,
    pub slices: Vec<SliceDoc>,
    pub kernels: KernelsDoc,
    #[serde(default)]
    pub metadata: BTreeMap<String, Value>,
}

fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<Array2<f64>, CoreError> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(CoreError::Structural(format!("{what} has rows of different lengths")));
    }
    Array2::from_shape_vec((n, m), rows.concat()).map_err(|e| CoreError::Structural(format!("{what}: {e}")))
}

fn pair_key(key: &str, n: usize) -> Result<(usize, usize), CoreError> {
    let bad = || CoreError::Structural(format!("kernel key {key:?} is not of the form \"s:t\" with s < t < {n}"));
    let (s, t) = key.split_once(':').ok_or_else(bad)?;
    let (s, t): (usize, usize) = (s.parse().map_err(|_| bad())?, t.parse().map_err(|_| bad())?);
    if s < t && t < n {
        Ok((s, t))
    } else {
        Err(bad())
    }
}

impl FlowDocument {
    pub fn from_flow(flow: &MetricFlow) -> Self {
        let n = flow.n_times();
        let slices = flow
            .slices()
            .iter()
            .map(|s| SliceDoc { labels: s.labels().to_vec(), dist: s.dist().iter().copied().collect() })
            .collect();
        let kernels = match flow.mode() {
            KernelMode::Markov => KernelsDoc::Markov((0..n.saturating_sub(1)).map(|k| rows(flow.adjacent_kernel(k))).collect()),
            KernelMode::Full => KernelsDoc::Full(
                (0..n)
                    .flat_map(|s| ((s + 1)..n).map(move |t| (s, t)))
                    .map(|(s, t)| (format!("{s}:{t}"), rows(&flow.kernel(s, t))))
                    .collect(),
            ),
        };
        let mut metadata: BTreeMap<String, Value> =
            flow.tags.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
        if flow.approximate {
            metadata.insert(APPROXIMATE_KEY.into(), Value::Bool(true));
        }
        Self { format_version: FORMAT_VERSION, grid: flow.grid().times().to_vec(), slices, kernels, metadata }
    }

    /// Builds the flow and runs the structural checks (shapes, finite non-negative
    /// entries, symmetric zero-diagonal distances, increasing grid).
    pub fn to_flow(&self) -> Result<MetricFlow, CoreError> {
        if self.format_version != FORMAT_VERSION {
            return Err(CoreError::Structural(format!(
                "format_version {} is not supported (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let grid = TimeGrid::new(self.grid.clone())?;
        let n = grid.len();
        let slices = self
            .slices
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let m = s.labels.len();
                if s.dist.len() != m * m {
                    return Err(CoreError::Structural(format!("slice {i}: {} distances for {m} points", s.dist.len())));
                }
                let d = Array2::from_shape_vec((m, m), s.dist.clone()).expect("length checked");
                FiniteMetricSpace::new(s.labels.clone(), d)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut flow = match &self.kernels {
            KernelsDoc::Markov(adj) => {
                let adj = adj
                    .iter()
                    .enumerate()
                    .map(|(k, m)| matrix(m, &format!("kernel {k}:{}", k + 1)))
                    .collect::<Result<Vec<_>, _>>()?;
                MetricFlow::markov(grid, slices, adj)?
            }
            KernelsDoc::Full(map) => {
                let mut by_pair = BTreeMap::new();
                for (key, m) in map {
                    if by_pair.insert(pair_key(key, n)?, m).is_some() {
                        return Err(CoreError::Structural(format!("kernel {key} appears twice")));
                    }
                }
                let expected = n * n.saturating_sub(1) / 2;
                if by_pair.len() != expected {
                    return Err(CoreError::Structural(format!("{} kernels given, {expected} needed", by_pair.len())));
                }
                MetricFlow::full(grid, slices, |s, t| matrix(by_pair[&(s, t)], &format!("kernel {s}:{t}")))?
            }
        };
        for (k, v) in &self.metadata {
            if k == APPROXIMATE_KEY {
                flow.approximate = v.as_bool().unwrap_or(false);
            } else {
                let text = v.as_str().map_or_else(|| v.to_string(), str::to_owned);
                flow.tags.push((k.clone(), text));
            }
        }
        Ok(flow)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents contain only finite numbers and strings")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text).map_err(|source| CliError::Json { path: path.display().to_string(), source })
    }

    /// Writes to `path`, or to stdout when `path` is `None`.
    pub fn write(&self, path: Option<&Path>) -> Result<(), CliError> {
        let mut text = self.to_json();
        text.push('\n');
        match path {
            Some(p) => std::fs::write(p, text).map_err(|source| CliError::Io { path: p.display().to_string(), source }),
            None => std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
        }
    }
}

/// Reads a document and builds its flow.
pub fn load_flow(path: &Path) -> Result<MetricFlow, CliError> {
    FlowDocument::read(path)?
        .to_flow()
        .map_err(|source| CliError::Document { path: path.display().to_string(), source })
}
