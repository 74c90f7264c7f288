//! Topic models whose topics are chosen to explain document labels.
//!
//! The crate covers collapsed-Gibbs LDA, supervised LDA by stochastic EM,
//! and two random searches over LDA chains (Best-Of and Branching) scored by
//! cross-validated predictive R² on held-out labels. A diagnostics module
//! enumerates the exact posterior on tiny instances to study how the label
//! likelihood concentrates as σ shrinks.

pub mod corpus;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod math;
mod parallel;
pub mod rng;
pub mod sampler;
pub mod search;
pub mod slda;
pub mod synth;

pub use error::{Error, Result};
