//! Covariance completion for linear dynamical systems.
//!
//! Given a stable model `ẋ = Ax + Bu` and a subset of observed steady-state
//! output correlations, the solvers find a state covariance `X` and a
//! low-rank input correlation structure `Z` explaining them. Helpers
//! factor `Z` into input channels, build a feedback realization, and
//! verify it by stochastic simulation.
// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod ama;
pub mod cli;
pub mod decomposition;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod linops;
pub mod lyapunov;
pub mod problem;
pub mod proxops;
pub mod realization;
pub mod simulation;
pub mod solver;

pub use error::{CcError, Result};
pub use linalg::Mat;
