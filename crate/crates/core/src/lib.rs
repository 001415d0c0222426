//! Wireless sensor network lifetime maximization.
//!
//! Builds random unit-disk sensor topologies, solves the inverse-lifetime
//! LP centrally, and solves it distributedly with a per-node ADMM scheme
//! and a dual subgradient baseline, recording residual and message traces.

pub mod admm;
pub mod error;
pub mod harness;
pub mod lp;
pub mod report;
pub mod simplex;
pub mod subgradient;
pub mod topology;

pub use error::{Error, Result};
