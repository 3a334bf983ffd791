//! Numerical laboratory for dispersive propagators `e^{itΦ(D)}`.
//!
//! The crate covers homogeneous phase functions, the spectral propagator on a
//! periodic lattice with dyadic frequency projections, mixed space-time norms,
//! temporal square functions, Fourier restriction to the characteristic surface,
//! sparse ball decompositions of lattice cube sets, and a reproducible
//! experiment harness.

// `!(x > 0.0)` style range checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod norms;
pub mod phase;
pub mod pipeline;
pub mod restriction;
pub mod sparse;
pub mod spectral;
pub mod squarefn;

pub use error::{Error, Result};
