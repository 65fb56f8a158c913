//! Ambient spaces for comparing slices of different flows, Gromov-W1 bounds,
//! and the F-distance within a correspondence.

pub mod ambient;
pub mod fdist;
pub mod glue;
pub mod gw;

pub use ambient::{
    build_union_correspondence, combine_correspondences, identity_correspondence, identity_relation, Correspondence,
    Relation, TimeAmbient,
};
pub use fdist::{f_distance_embedded, f_distance_within, f_triangle_check, EMode, FDistanceReport, FlowPair, PairIntegral, TriangleReport};
pub use glue::{glue_along_relation, glue_two_slices, half_distortion, FlowLink, GluedSpace};
pub use gw::{gw1_upper_bound, GwBound, GwMode};
