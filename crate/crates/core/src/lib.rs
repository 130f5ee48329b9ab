//! Fractional attraction-repulsion chemotaxis: pseudo-spectral simulation,
//! kernel quadrature, comparison constants, regime classification,
//! spreading diagnostics and a restricted fractional eigenproblem.

// `!(x > 0.0)` is used on purpose so that NaN fails range checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod comparison;
pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod ode;
pub mod params;
pub mod quad;
pub mod regime;
pub mod spectral;
pub mod spreading;

pub use error::{Error, Result};
pub use params::Params;
