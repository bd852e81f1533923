//! Differentially private linear programming.
//!
//! Solvers cover each privacy model for LPs: constraint-private (dense
//! multiplicative weights over a private oracle), scalar-, row- and
//! column-private (primal multiplicative weights with a private dual oracle),
//! and objective-private (Laplace-perturbed objective, exact solve). The
//! [`attack`] module builds the reconstruction gadgets that show where
//! privacy is impossible, and [`verification`] holds the brute-force oracles
//! used to check every guarantee.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attack;
pub mod constraint_private;
pub mod error;
pub mod low_sensitivity;
pub mod lp;
pub mod mechanisms;
pub mod mw;
pub mod objective_private;
pub mod report;
pub mod rng;
pub mod verification;

pub use error::{Error, Result};
