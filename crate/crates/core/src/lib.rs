//! Photon-blockade statistics of two tunnel-coupled Kerr cavities with
//! intracavity parametric gain.
//!
//! Two independent routes to the equal-time correlation g2(0) are provided:
//! a weak-drive amplitude hierarchy ([`amplitude`]) and the steady state of the
//! Lindblad master equation on a truncated Fock space ([`lindblad`]).
//! [`optimize`] locates the detuning/gain pairs that cancel the two-photon
//! amplitude, and [`sweep`] produces parameter sweeps and figure datasets.

// `!(x >= bound)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amplitude;
pub mod cli;
pub mod error;
pub mod fock;
pub mod lindblad;
pub mod model;
pub mod optimize;
pub mod sweep;

pub use error::{Error, Result};
pub use fock::{ComplexOperator, FockBasis};
pub use model::{strong_params, weak_params, Cavity, SystemParams};
