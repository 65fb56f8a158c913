//! Upper bounds on the Gromov-W1 distance from explicit ambient spaces.

use super::glue::glue_along_relation;
use crate::error::{Error, Result};
use crate::ot::{w1_value, FiniteMetricSpace, ProbMeasure};

/// Largest slice size for exhaustive enumeration.
pub const EXHAUSTIVE_MAX_POINTS: usize = 6;

#[derive(Debug, Clone)]
pub enum GwMode {
    /// Union along this relation.
    Relation(Vec<(usize, usize)>),
    /// Minimum over all injective matchings of the smaller space into the larger.
    Exhaustive,
}

#[derive(Debug, Clone)]
pub struct GwBound {
    pub value: f64,
    /// Relation attaining the value.
    pub relation: Vec<(usize, usize)>,
    /// Half-distortion of that relation.
    pub eps: f64,
}

fn push(mu: &ProbMeasure, embed: &[usize], n: usize) -> Result<ProbMeasure> {
    let mut w = vec![0.0; n];
    for (i, &e) in embed.iter().enumerate() {
        w[e] += mu.w(i);
    }
    ProbMeasure::new(w)
}

fn bound_for(s1: &FiniteMetricSpace, s2: &FiniteMetricSpace, mu1: &ProbMeasure, mu2: &ProbMeasure, rel: &[(usize, usize)]) -> Result<GwBound> {
    let (g, eps) = glue_along_relation(s1, s2, rel)?;
    let n = g.ambient.len();
    let value = w1_value(&g.ambient, &push(mu1, &g.embed1, n)?, &push(mu2, &g.embed2, n)?)?;
    Ok(GwBound { value, relation: rel.to_vec(), eps })
}

/// Injective maps `0..k → 0..n` in lexicographic order.
fn injections(k: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    let mut used = vec![false; n];
    fn rec(k: usize, n: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                cur.push(j);
                rec(k, n, cur, used, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    rec(k, n, &mut cur, &mut used, &mut out);
    out
}

pub fn gw1_upper_bound(
    s1: &FiniteMetricSpace,
    s2: &FiniteMetricSpace,
    mu1: &ProbMeasure,
    mu2: &ProbMeasure,
    mode: &GwMode,
) -> Result<GwBound> {
    if mu1.len() != s1.len() || mu2.len() != s2.len() {
        return Err(Error::Input("measure length does not match the space".into()));
    }
    match mode {
        GwMode::Relation(rel) => bound_for(s1, s2, mu1, mu2, rel),
        GwMode::Exhaustive => {
            let (n1, n2) = (s1.len(), s2.len());
            if n1.max(n2) > EXHAUSTIVE_MAX_POINTS {
                return Err(Error::Input(format!("exhaustive mode supports at most {EXHAUSTIVE_MAX_POINTS} points")));
            }
            let mut best: Option<GwBound> = None;
            let maps = if n1 <= n2 { injections(n1, n2) } else { injections(n2, n1) };
            for m in maps {
                let rel: Vec<(usize, usize)> =
                    if n1 <= n2 { m.iter().enumerate().map(|(i, &j)| (i, j)).collect() } else { m.iter().enumerate().map(|(j, &i)| (i, j)).collect() };
                let b = bound_for(s1, s2, mu1, mu2, &rel)?;
                if best.as_ref().is_none_or(|x| b.value < x.value) {
                    best = Some(b);
                }
            }
            best.ok_or_else(|| Error::Input("empty spaces".into()))
        }
    }
}
