//! Verification toolkit for viscosity solutions of second-order nonlocal
//! integro-differential equations with Levy-type jump kernels.
//!
//! The crate evaluates compensated jump integrals under five definitional
//! splittings, builds the C2 approximating test functions behind them, and
//! certifies the equivalence relationships numerically on desk-scale
//! instances.

pub mod checkers;
pub mod error;
pub mod forge;
pub mod functions;
pub mod harness;
pub mod levy;
pub mod linalg;
pub mod quadrature;
pub mod report;
pub mod sampling;
pub mod scenario;

pub use error::{Error, Result};
