//! Heat-diffusion influence graphs on structural brain connectivity,
//! subnetwork detection, permutation inference against functional
//! correlations, penalized precision estimation, and a seeded simulation
//! laboratory for benchmarking the full pipelines.
//!
//! All types are immutable after construction and safe to share across
//! threads; every stochastic routine takes an explicit seed and produces
//! results independent of thread count.

pub mod baselines;
pub mod detect;
pub mod diffusion;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod inference;
pub mod io;
pub mod pipeline;
pub mod precision;
pub mod rng;
pub mod simlab;

pub use error::{CoreError, Result};
