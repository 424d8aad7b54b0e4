//! Closed-form solutions of the Dirac equation and the generalized
//! Euler-Poisson-Darboux (EPD) equation in spatially flat FLRW spacetimes with
//! power-law scale factor `a(t) = a0 t^ell`, together with an independent ODE
//! oracle used to verify them.

// NaN-rejecting `!(x > 0.0)` guards, matrix index loops and full-precision
// fixture constants are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::excessive_precision)]

pub mod cosmology;
pub mod dirac_algebra;
pub mod dirac_solver;
pub mod epd_solver;
pub mod error;
pub mod kernels;
pub mod oracle;
pub mod propagator;
pub mod quadrature;
pub mod special_functions;
pub mod verify;

pub use cosmology::{CosmologyParams, ReducedMass};
pub use error::{Error, Result};
pub use num_complex::Complex64;
