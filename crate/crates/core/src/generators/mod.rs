//! Closed-form and self-similar flows used as ground truth.

pub mod gaussian;
pub mod soliton;
pub mod static_flow;
pub mod two_point;

pub use gaussian::{gaussian_errors, gaussian_flow_discrete, refinement_study, GaussianErrors, GaussianSidecar, RefinementStudy};
pub use soliton::{identity_self_similarity, self_similar_chain, soliton_fixed_point, SolitonMap, SolitonResult};
pub use static_flow::{complete_graph_semigroup, generator_semigroup, is_static, path_generator, static_flow};
pub use two_point::{admissible_at, min_c, min_c_argmax, two_point_flow, two_point_kernel, two_point_variance};
