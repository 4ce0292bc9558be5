//! Finite-difference laboratory for the porous medium equation `u_t = Δ(u^m)`:
//! explicit solver, source-type solutions, free-boundary analysis and
//! numerical checks of the classical a priori estimates.

// NaN must fail the `!(x > 0.0)` style parameter checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cli;
pub mod config;
pub mod error;
pub mod field;
pub mod free_boundary;
pub mod harness;
pub mod inequalities;
pub mod numerics;
pub mod report;
pub mod solver;
pub mod surface;

pub use error::{Error, Result};
