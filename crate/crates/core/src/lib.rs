//! Entanglement harvesting by pointlike and smeared two-level detectors
//! coupled to a scalar field in a coherent state, computed non-perturbatively
//! for delta-switched couplings.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision, clippy::too_many_arguments)]

pub mod quadrature;
pub mod kernel;
pub mod state;
pub mod spectra;
pub mod perturbative;
pub mod oracle;
pub mod pipeline;
