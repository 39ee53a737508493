//! Multi-fidelity pseudo-marginal MCMC.
//!
//! A model supplies a sequence of increasingly accurate (and increasingly
//! expensive) log densities. Randomly truncated telescoping sums over that
//! sequence give unbiased, possibly negative, estimates of the limiting
//! density; the samplers here run on their absolute values and the recorded
//! signs correct expectations afterwards.

pub mod chain;
pub mod checks;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod io;
pub mod models;
pub mod numerics;
pub mod samplers;
pub mod signed_log;
pub mod truncation;

pub use error::{Error, Result};
pub use estimator::{estimate, EstimateRecord, TargetSequence};
pub use signed_log::{Sign, SignedLog};
pub use truncation::{EstimatorScheme, TruncationDistribution};
