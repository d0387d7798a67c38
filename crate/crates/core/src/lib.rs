//! Monte Carlo power manifolds and cheap surrogate predictors.
//!
//! Power for a hypothesis test depends jointly on every model coefficient and
//! on the sample size. This crate estimates that surface by simulation and
//! then learns it from a small fraction of simulated points.
//!
//! - [`rng`], [`special`]: seeded substreams and the distribution functions
//!   behind every p-value, plus analytic power for the t and F tests.
//! - [`models`]: synthetic designs, REG / LOGIT / RMANOVA fits and tests.
//! - [`power`], [`sampler`]: Monte Carlo power with global call accounting
//!   and the centroid-plus-neighbours parameter sampler.
//! - [`features`]: scaled weight, PCA, feature assembly, dataset files.
//! - [`surrogate`]: the 64-32-1 network, Adam training, transfer init.
//! - [`baselines`], [`metrics`]: comparison predictors and scoring.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default). [`Execution::Sequential`] forces the serial path, and
//! both paths produce bit-identical results.

// NaN-rejecting `!(x > 0.0)` checks and index loops over parallel arrays are intended.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod error;
pub mod exec;
pub mod features;
pub mod metrics;
pub mod models;
pub mod power;
pub mod rng;
pub mod sampler;
pub mod special;
pub mod surrogate;

pub use error::{Error, Result};
pub use exec::Execution;
pub use power::{call_count, reset_call_count, CallCounter, ParameterPoint, PowerEngine, PowerRecord};
pub use rng::RngStream;
