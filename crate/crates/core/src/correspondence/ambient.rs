//! Correspondences between metric flows: per-time ambient spaces with one
//! isometric embedding per flow.

use ndarray::Array2;

use super::glue::{embedding_defect, glue_along_relation};
use crate::error::{Error, Result};
use crate::flow::MetricFlow;
use crate::ot::FiniteMetricSpace;

/// Ambient space at one time with an embedding per flow.
#[derive(Debug, Clone)]
pub struct TimeAmbient {
    pub space: FiniteMetricSpace,
    pub embeds: Vec<Vec<usize>>,
}

/// Per-time ambients over the common times `I″`; every flow takes part at every time.
#[derive(Debug, Clone)]
pub struct Correspondence {
    pub times: Vec<f64>,
    pub ambients: Vec<TimeAmbient>,
}

/// Matched point pairs at one time.
pub type Relation = Vec<(usize, usize)>;

impl Correspondence {
    pub fn n_flows(&self) -> usize {
        self.ambients.first().map_or(0, |a| a.embeds.len())
    }

    /// Position of `time` in `I″`.
    pub fn position(&self, time: f64) -> Option<usize> {
        self.times.iter().position(|&t| t == time)
    }

    /// Keeps the embeddings of the listed flows, in that order.
    pub fn project(&self, flows: &[usize]) -> Result<Self> {
        if flows.iter().any(|&i| i >= self.n_flows()) {
            return Err(Error::Input("projection refers to a missing flow".into()));
        }
        let ambients = self
            .ambients
            .iter()
            .map(|a| TimeAmbient { space: a.space.clone(), embeds: flows.iter().map(|&i| a.embeds[i].clone()).collect() })
            .collect();
        Ok(Self { times: self.times.clone(), ambients })
    }

    /// Same ambients with the two flows of a pairwise correspondence exchanged.
    pub fn swapped(&self) -> Result<Self> {
        if self.n_flows() != 2 {
            return Err(Error::Input("only pairwise correspondences can be swapped".into()));
        }
        self.project(&[1, 0])
    }

    /// Largest isometry defect of the embeddings of `flows[i]` over all times.
    pub fn isometry_defect(&self, flows: &[&MetricFlow]) -> Result<f64> {
        if flows.len() != self.n_flows() {
            return Err(Error::Input(format!("{} flows for {} embeddings", flows.len(), self.n_flows())));
        }
        let mut worst = 0.0f64;
        for (k, &time) in self.times.iter().enumerate() {
            for (i, f) in flows.iter().enumerate() {
                let idx = slice_index(f, time)?;
                worst = worst.max(embedding_defect(&self.ambients[k].space, &self.ambients[k].embeds[i], f.slice(idx)));
            }
        }
        Ok(worst)
    }
}

pub(crate) fn slice_index(flow: &MetricFlow, time: f64) -> Result<usize> {
    flow.grid()
        .index_of(time)
        .ok_or_else(|| Error::Input(format!("time {time} is not on the flow's grid")))
}

/// Union correspondence along a relation per time (`(time, relation)` pairs in
/// increasing time). Returns the correspondence and `ε_t` per time.
pub fn build_union_correspondence(
    f1: &MetricFlow,
    f2: &MetricFlow,
    relations: &[(f64, Relation)],
) -> Result<(Correspondence, Vec<f64>)> {
    if relations.is_empty() {
        return Err(Error::Input("a correspondence needs at least one time".into()));
    }
    if relations.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::Input("correspondence times must increase".into()));
    }
    let mut ambients = Vec::with_capacity(relations.len());
    let mut eps = Vec::with_capacity(relations.len());
    for (time, rel) in relations {
        if rel.is_empty() {
            return Err(Error::Input(format!("empty relation at time {time}")));
        }
        let (a, b) = (slice_index(f1, *time)?, slice_index(f2, *time)?);
        let (g, e) = glue_along_relation(f1.slice(a), f2.slice(b), rel)?;
        ambients.push(TimeAmbient { space: g.ambient, embeds: vec![g.embed1, g.embed2] });
        eps.push(e);
    }
    Ok((Correspondence { times: relations.iter().map(|(t, _)| *t).collect(), ambients }, eps))
}

/// `(x, x)` for every point of a slice.
pub fn identity_relation(n: usize) -> Relation {
    (0..n).map(|i| (i, i)).collect()
}

/// Union correspondence over the common grid times with identity relations
/// (slices must have equal sizes).
pub fn identity_correspondence(f1: &MetricFlow, f2: &MetricFlow) -> Result<(Correspondence, Vec<f64>)> {
    let times: Vec<f64> = f1.grid().times().iter().copied().filter(|&t| f2.grid().index_of(t).is_some()).collect();
    let relations = times
        .iter()
        .map(|&t| {
            let n = f1.slice(slice_index(f1, t)?).len();
            if n != f2.slice(slice_index(f2, t)?).len() {
                return Err(Error::Input(format!("slices differ in size at time {t}")));
            }
            Ok((t, identity_relation(n)))
        })
        .collect::<Result<Vec<_>>>()?;
    build_union_correspondence(f1, f2, &relations)
}

/// Joins `c12` (last flow = middle) and `c23` (first flow = middle) on their common
/// times: `Z¹² ⊔ Z²³` with `d(z, z′) = min_x (d¹²(z, φ²(x)) + d²³(φ²(x), z′))`.
/// The result embeds every flow of `c12`, then the flows of `c23` after the middle.
pub fn combine_correspondences(c12: &Correspondence, c23: &Correspondence) -> Result<Correspondence> {
    let mut times = Vec::new();
    let mut ambients = Vec::new();
    for (k, &t) in c12.times.iter().enumerate() {
        let Some(j) = c23.position(t) else { continue };
        let (a, b) = (&c12.ambients[k], &c23.ambients[j]);
        let mid_a = a.embeds.last().ok_or_else(|| Error::Input("empty correspondence".into()))?;
        let mid_b = &b.embeds[0];
        if mid_a.len() != mid_b.len() {
            return Err(Error::Input(format!("middle flows differ at time {t}")));
        }
        let (na, nb) = (a.space.len(), b.space.len());
        let cross = Array2::from_shape_fn((na, nb), |(z, zp)| {
            mid_a
                .iter()
                .zip(mid_b)
                .map(|(&pa, &pb)| a.space.d(z, pa) + b.space.d(pb, zp))
                .fold(f64::INFINITY, f64::min)
        });
        let n = na + nb;
        let dist = Array2::from_shape_fn((n, n), |(p, q)| match (p < na, q < na) {
            (true, true) => a.space.d(p, q),
            (false, false) => b.space.d(p - na, q - na),
            (true, false) => cross[[p, q - na]],
            (false, true) => cross[[q, p - na]],
        });
        let labels = a
            .space
            .labels()
            .iter()
            .map(|l| format!("a.{l}"))
            .chain(b.space.labels().iter().map(|l| format!("b.{l}")))
            .collect();
        let space = FiniteMetricSpace::new(labels, dist)?;
        let report = space.check_pseudometric_axioms();
        if !report.is_valid() {
            return Err(Error::Internal(format!(
                "combined ambient violates the triangle inequality by {:e}",
                report.worst_triangle_excess()
            )));
        }
        let mut embeds = a.embeds.clone();
        embeds.extend(b.embeds.iter().skip(1).map(|e| e.iter().map(|&i| i + na).collect()));
        times.push(t);
        ambients.push(TimeAmbient { space, embeds });
    }
    if times.is_empty() {
        return Err(Error::Input("the correspondences share no times".into()));
    }
    Ok(Correspondence { times, ambients })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::TimeGrid;
    use crate::generators::two_point_flow;

    fn pair(d: f64) -> MetricFlow {
        two_point_flow(100.0, d, TimeGrid::uniform(0.0, 1.0, 3).unwrap()).unwrap()
    }

    #[test]
    fn identity_union_has_zero_epsilon() {
        let f = pair(1.0);
        let (c, eps) = identity_correspondence(&f, &f).unwrap();
        assert!(eps.iter().all(|&e| e == 0.0));
        let a = &c.ambients[0];
        assert_eq!(a.space.d(a.embeds[0][1], a.embeds[1][1]), 0.0);
        assert_eq!(c.isometry_defect(&[&f, &f]).unwrap(), 0.0);
    }

    #[test]
    fn full_relation_epsilon() {
        let (f1, f2) = (pair(1.0), pair(1.3));
        let (_, eps) = identity_correspondence(&f1, &f2).unwrap();
        assert!(eps.iter().all(|&e| (e - 0.15).abs() < 1e-15));
    }

    #[test]
    fn combined_ambient_is_isometric() {
        let (f1, f2, f3) = (pair(1.0), pair(1.1), pair(1.2));
        let (c12, _) = identity_correspondence(&f1, &f2).unwrap();
        let (c23, _) = identity_correspondence(&f2, &f3).unwrap();
        let c = combine_correspondences(&c12, &c23).unwrap();
        assert_eq!(c.n_flows(), 3);
        assert!(c.isometry_defect(&[&f1, &f2, &f3]).unwrap() <= 1e-15);
        for a in &c.ambients {
            assert!(a.space.check_pseudometric_axioms().is_valid());
        }
    }

    #[test]
    fn self_combination_identifies_copies() {
        let f = pair(1.0);
        let (c, _) = identity_correspondence(&f, &f).unwrap();
        let cc = combine_correspondences(&c, &c).unwrap();
        let a = &cc.ambients[1];
        for x in 0..2 {
            assert_eq!(a.space.d(a.embeds[0][x], a.embeds[2][x]), 0.0);
        }
    }

    #[test]
    fn disjoint_times_are_rejected() {
        let f = pair(1.0);
        let g = two_point_flow(100.0, 1.0, TimeGrid::new(vec![5.0, 6.0]).unwrap()).unwrap();
        let (c1, _) = identity_correspondence(&f, &f).unwrap();
        let (c2, _) = identity_correspondence(&g, &g).unwrap();
        assert!(combine_correspondences(&c1, &c2).is_err());
    }
}
