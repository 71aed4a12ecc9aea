//! Stochastic coordinate descent for sparse regularized empirical risk
//! minimization, with arbitrary sampling.
//!
//! The data matrix is `X in R^{d x n}` with one example per column.

pub mod block;
pub mod cli;
pub mod data;
pub mod dual;
pub mod error;
pub mod eso;
pub mod faceoff;
pub mod harness;
pub mod loss;
pub mod primal;
pub mod rng;
pub mod sampling;
pub mod trace;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
