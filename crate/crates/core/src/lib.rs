//! Simulation, sequence prediction and evaluation toolkit for vision-aided
//! mmWave beam tracking.

pub mod baselines;
pub mod codebook;
pub mod dataset;
pub mod embedding;
pub mod error;
pub mod feature;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod report;
pub mod rng;
pub mod scene;

pub use error::{Error, Result};
