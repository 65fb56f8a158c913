//! Exact optimal transport and metric-measure-space utilities.

pub mod approximation;
pub mod lp;
pub mod mass_distribution;
pub mod measure;
pub mod space;
pub mod transport;
pub mod variance;
pub mod wasserstein;

pub use approximation::{finite_approximation, Approximation};
pub use mass_distribution::{in_class_m, mass_distribution_fn, BFunction, ClassReport};
pub use measure::{glue_couplings, outer_marginal, Coupling, ProbMeasure};
pub use space::{product_space, FiniteMetricSpace, MetricReport, MetricViolation};
pub use variance::{point_variance, self_variance, variance};
pub use wasserstein::{w1_distance, w1_value, wp_distance, TransportCertificate, W1Result};
