//! Regression with an implicit noise model.
//!
//! A stochastic generator `y = f(x, z)` is trained so that the empirical
//! optimal transport cost between real `(x, y)` samples and generated ones is
//! minimal. Each mini-batch solves a linear assignment problem, either over
//! the full cost matrix or over one restricted to x-space neighbours.
//!
//! Modules:
//! - [`lap`]: dense and sparse assignment solvers plus a brute-force oracle.
//! - [`transport`]: ground cost, cost matrices, OT cost and its gradient.
//! - [`generator`]: the network, its exact backward pass, and Adam.
//! - [`trainer`]: mini-batch assembly and the training loop.
//! - [`data`]: synthetic generators, CSV IO, standardization, k-fold splits.
//! - [`eval`]: Parzen NLPD, trimmed metrics, cross-validation.

pub mod data;
pub mod error;
pub mod eval;
pub mod generator;
pub mod lap;
pub mod par;
pub mod trainer;
pub mod transport;

pub use error::{Error, Result};
