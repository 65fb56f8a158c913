//! Common ambient spaces for two metric spaces: the gluing along a flow link
//! and the union along a relation.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::flow::MetricFlow;
use crate::ot::{w1_value, FiniteMetricSpace, ProbMeasure};

/// Absolute slack for the gluing hypothesis and for embedding isometries.
pub const GLUE_TOL: f64 = 1e-12;

/// Disjoint union `Z` with two isometric embeddings.
#[derive(Debug, Clone)]
pub struct GluedSpace {
    /// May be a pseudometric: distinct points at distance zero are kept.
    pub ambient: FiniteMetricSpace,
    pub embed1: Vec<usize>,
    pub embed2: Vec<usize>,
}

impl GluedSpace {
    /// Largest `|d_Z(φ(i), φ(j)) − d(i, j)|` over both embeddings.
    pub fn isometry_defect(&self, s1: &FiniteMetricSpace, s2: &FiniteMetricSpace) -> f64 {
        embedding_defect(&self.ambient, &self.embed1, s1).max(embedding_defect(&self.ambient, &self.embed2, s2))
    }
}

pub(crate) fn embedding_defect(z: &FiniteMetricSpace, embed: &[usize], s: &FiniteMetricSpace) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..s.len() {
        for j in 0..s.len() {
            worst = worst.max((z.d(embed[i], embed[j]) - s.d(i, j)).abs());
        }
    }
    worst
}

/// The points `W ⊆ X_t` and their kernels `ν_{w;s}` on `X_s`.
#[derive(Debug, Clone)]
pub struct FlowLink {
    pub w: Vec<usize>,
    pub kernels: Vec<ProbMeasure>,
}

impl FlowLink {
    /// Link read off a flow between grid indices `s ≤ t`.
    pub fn from_flow(flow: &MetricFlow, s: usize, t: usize, w: &[usize]) -> Result<Self> {
        let kernels = w.iter().map(|&y| flow.nu(t, y, s)).collect::<Result<_>>()?;
        Ok(Self { w: w.to_vec(), kernels })
    }
}

/// Disjoint union of two spaces with the given cross-distance block
/// (`cross[[i, j]]` between point `i` of the first and `j` of the second).
pub(crate) fn union_space(s1: &FiniteMetricSpace, s2: &FiniteMetricSpace, cross: &Array2<f64>, tags: (&str, &str)) -> Result<GluedSpace> {
    let (n1, n2) = (s1.len(), s2.len());
    let n = n1 + n2;
    let dist = Array2::from_shape_fn((n, n), |(a, b)| match (a < n1, b < n1) {
        (true, true) => s1.d(a, b),
        (false, false) => s2.d(a - n1, b - n1),
        (true, false) => cross[[a, b - n1]],
        (false, true) => cross[[b, a - n1]],
    });
    let labels = s1
        .labels()
        .iter()
        .map(|l| format!("{}:{l}", tags.0))
        .chain(s2.labels().iter().map(|l| format!("{}:{l}", tags.1)))
        .collect();
    let ambient = FiniteMetricSpace::new(labels, dist)?;
    let report = ambient.check_pseudometric_axioms();
    if !report.is_valid() {
        return Err(Error::Internal(format!(
            "glued space violates the triangle inequality by {:e}",
            report.worst_triangle_excess()
        )));
    }
    Ok(GluedSpace { ambient, embed1: (0..n1).collect(), embed2: (n1..n).collect() })
}

/// Glues `X_s` and `X_t` with `d_Z(x, y) = min_{w∈W} (d_t(y, w) + ∫ d_s(x, ·) dν_{w;s}) + δ`.
///
/// Requires `0 ≤ d_t(w1, w2) − d_W1(ν_{w1;s}, ν_{w2;s}) ≤ δ` on `W`.
pub fn glue_two_slices(xs: &FiniteMetricSpace, xt: &FiniteMetricSpace, link: &FlowLink, delta: f64) -> Result<GluedSpace> {
    if !(delta >= 0.0) {
        return Err(Error::Input(format!("δ = {delta} must be non-negative")));
    }
    if link.w.is_empty() || link.w.len() != link.kernels.len() {
        return Err(Error::Input("the link needs one kernel per point of a nonempty W".into()));
    }
    if link.kernels.iter().any(|k| k.len() != xs.len()) || link.w.iter().any(|&w| w >= xt.len()) {
        return Err(Error::Input("link does not match the slices".into()));
    }
    let mut worst: Option<(f64, usize, usize)> = None;
    for a in 0..link.w.len() {
        for b in (a + 1)..link.w.len() {
            let gap = xt.d(link.w[a], link.w[b]) - w1_value(xs, &link.kernels[a], &link.kernels[b])?;
            let excess = if gap < 0.0 { -gap } else { gap - delta };
            if excess > GLUE_TOL * xt.d(link.w[a], link.w[b]).max(1.0) && worst.is_none_or(|(e, _, _)| excess > e) {
                worst = Some((excess, link.w[a], link.w[b]));
            }
        }
    }
    if let Some((e, y1, y2)) = worst {
        return Err(Error::Input(format!("gluing hypothesis fails at ({y1}, {y2}) by {e:e}")));
    }
    // ∫ d_s(x, ·) dν_w for every x and w.
    let mean_dist: Vec<Vec<f64>> = link
        .kernels
        .iter()
        .map(|nu| (0..xs.len()).map(|x| xs.dist().row(x).dot(&nu.weights())).collect())
        .collect();
    let cross = Array2::from_shape_fn((xs.len(), xt.len()), |(x, y)| {
        link.w
            .iter()
            .zip(&mean_dist)
            .map(|(&w, md)| xt.d(y, w) + md[x])
            .fold(f64::INFINITY, f64::min)
            + delta
    });
    union_space(xs, xt, &cross, ("s", "t"))
}

/// Half the distortion of a relation: `½ max |d¹(w1, w1′) − d²(w2, w2′)|`.
pub fn half_distortion(s1: &FiniteMetricSpace, s2: &FiniteMetricSpace, relation: &[(usize, usize)]) -> f64 {
    let mut dis = 0.0f64;
    for &(a1, a2) in relation {
        for &(b1, b2) in relation {
            dis = dis.max((s1.d(a1, b1) - s2.d(a2, b2)).abs());
        }
    }
    0.5 * dis
}

/// Union along a nonempty relation with `d_Z(x1, x2) = min (d¹(x1, w1) + ε + d²(w2, x2))`,
/// `ε` half the distortion.
pub fn glue_along_relation(s1: &FiniteMetricSpace, s2: &FiniteMetricSpace, relation: &[(usize, usize)]) -> Result<(GluedSpace, f64)> {
    if relation.is_empty() {
        return Err(Error::Input("relation is empty".into()));
    }
    if relation.iter().any(|&(a, b)| a >= s1.len() || b >= s2.len()) {
        return Err(Error::Input("relation refers to a point outside the spaces".into()));
    }
    let eps = half_distortion(s1, s2, relation);
    let cross = Array2::from_shape_fn((s1.len(), s2.len()), |(x1, x2)| {
        relation
            .iter()
            .map(|&(w1, w2)| s1.d(x1, w1) + eps + s2.d(w2, x2))
            .fold(f64::INFINITY, f64::min)
    });
    Ok((union_space(s1, s2, &cross, ("1", "2"))?, eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::two_point_flow;
    use crate::flow::TimeGrid;
    use ndarray::array;

    #[test]
    fn self_gluing_with_diracs() {
        let s = FiniteMetricSpace::line(4, 1.0).unwrap();
        let link = FlowLink { w: (0..4).collect(), kernels: (0..4).map(|i| ProbMeasure::dirac(4, i)).collect() };
        let g = glue_two_slices(&s, &s, &link, 0.0).unwrap();
        for x in 0..4 {
            for y in 0..4 {
                assert_eq!(g.ambient.d(g.embed1[x], g.embed2[y]), s.d(x, y));
            }
        }
        assert_eq!(g.isometry_defect(&s, &s), 0.0);
    }

    #[test]
    fn two_point_gluing_at_exact_delta() {
        let (c, d, tau) = (5.0, 1.0, 0.1);
        let f = two_point_flow(c, d, TimeGrid::new(vec![0.0, tau]).unwrap()).unwrap();
        let link = FlowLink::from_flow(&f, 0, 1, &[0, 1]).unwrap();
        let delta = d * (1.0 - (-c * tau / (d * d)).exp());
        let g = glue_two_slices(f.slice(0), f.slice(1), &link, delta).unwrap();
        assert!(g.ambient.check_pseudometric_axioms().is_valid());
        assert!(glue_two_slices(f.slice(0), f.slice(1), &link, 0.5 * delta).is_err());
    }

    #[test]
    fn expanding_link_is_rejected() {
        // Kernels farther apart than the points themselves: negative gap.
        let xs = FiniteMetricSpace::line(2, 3.0).unwrap();
        let xt = FiniteMetricSpace::line(2, 1.0).unwrap();
        let link = FlowLink { w: vec![0, 1], kernels: vec![ProbMeasure::dirac(2, 0), ProbMeasure::dirac(2, 1)] };
        let err = glue_two_slices(&xs, &xt, &link, 10.0).unwrap_err();
        assert!(matches!(err, Error::Input(ref m) if m.contains("(0, 1)")));
    }

    #[test]
    fn relation_distortion() {
        let a = FiniteMetricSpace::line(2, 1.0).unwrap();
        let b = FiniteMetricSpace::new(vec!["p".into(), "q".into()], array![[0.0, 1.25], [1.25, 0.0]]).unwrap();
        let (g, eps) = glue_along_relation(&a, &b, &[(0, 0), (1, 1)]).unwrap();
        assert!((eps - 0.125).abs() < 1e-15);
        assert_eq!(g.isometry_defect(&a, &b), 0.0);
        assert!(glue_along_relation(&a, &b, &[]).is_err());
    }
}
