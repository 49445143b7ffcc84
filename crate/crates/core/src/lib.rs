//! Robust utility maximization on finite scenario trees.
//!
//! The primal problem maximizes the worst-case expected utility
//! `inf_{P in hull(priors)} E_P[U(theta . S_T + B)]` over predictable
//! strategies. Its dual minimizes `V(lambda Q | priors) + lambda E_Q[B]` over
//! scaling factors and martingale measures, where `V` is the convex
//! conjugate of `U` and `V(. | priors)` the robust V-divergence. The crate
//! solves both sides, reports the duality gap, and prices claims by robust
//! utility indifference.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod countable;
pub mod error;
pub mod functionals;
pub mod io;
pub mod linalg;
pub mod lp;
pub mod martingale;
pub mod model;
pub mod pricing;
pub mod solvers;
pub mod utility;

pub use error::{Error, Result};
