//! Discrete metric flows and the diagnostics built on them.

pub mod axioms;
pub mod concentration;
pub mod grid;
pub mod heat;
pub mod intrinsic;
pub mod metric_flow;
pub mod ops;
pub mod phi;
pub mod pstar;
pub mod quantitative;

pub use axioms::{verify_flow_axioms, AxiomReport, AxiomViolation, GradientMode, GradientRecord, Verdict};
pub use concentration::{
    concentration_excess, h_centers, h_concentration_constant, hcenter_mass_bound_check, kernel_variances,
    kernel_w1_contraction_excess, var_plus_ht_monotonicity_check, w1_kernel_monotonicity_check, HCenters,
    HConcentration, MassBoundEntry, MonotonicityReport,
};
pub use grid::TimeGrid;
pub use heat::{conj_backward, heat_forward, pairing_invariant_check, ConjHeatFlowField, HeatFlowField, PairingReport};
pub use intrinsic::{intrinsic_diagnostic, IntrinsicReport};
pub use metric_flow::{KernelMode, MetricFlow};
pub use ops::{cartesian_product_flow, rescale_shift, restrict_flow, slice_support, support_at, SupportReport};
pub use phi::{phi, phi_inv, phi_inv_pair, phi_prime};
pub use pstar::{pstar_contains, pstar_members, PStarParams, PStarResult};
pub use quantitative::{
    d_integral, intd_diff_bounds_check, mass_distribution_lower_bound_check, IntdReport, MassBoundReport,
    MassBoundSample,
};
