//! Numerical laboratory for discrete singular Radon transforms and twisted
//! oscillatory lattice operators.

pub mod arith;
pub mod diophantine;
pub mod error;
pub mod kernels;
pub mod lattice;
pub mod multipliers;
pub mod normlab;
pub mod operators;
pub mod polyalg;

pub use error::{LabError, Result};

/// Crate version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
