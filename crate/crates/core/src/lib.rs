//! Physical-constraint-preserving, locally divergence-free discontinuous
//! Galerkin solver for two-dimensional special relativistic MHD.

// `!(x > 0.0)` is used on purpose so that NaN fails validation; indexed
// loops mirror the quadrature sums they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli_io;
pub mod dg_operator;
pub mod eos;
pub mod error;
pub mod grid;
pub mod pcp_limiter;
pub mod physics;
pub mod problems;
pub mod sampling;
pub mod state;
pub mod time_integrator;

pub use error::{Error, Result};
