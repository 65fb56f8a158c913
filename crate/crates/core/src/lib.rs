//! Finite metric flows: exact optimal transport on finite metric measure
//! spaces, discrete flows with conjugate heat kernels, concentration
//! diagnostics, correspondences, and flow distances.
//!
//! The crate is organised in four layers:
//!
//! - [`ot`]: metric spaces, measures, couplings, exact W1/Wp, variance,
//!   mass distribution and finite approximation.
//! - [`flow`]: time grids, metric flows, heat and conjugate heat flows,
//!   axiom verification, concentration and quantitative checks.
//! - [`correspondence`]: gluing, union correspondences, Gromov-W1 bounds and
//!   the F-distance within a correspondence.
//! - [`generators`]: closed-form fixtures (two-point, Gaussian, static,
//!   soliton flows).
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correspondence;
pub mod error;
pub mod flow;
pub mod generators;
pub mod ot;

pub use error::{Error, Result};
