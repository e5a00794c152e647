//! Simulator and benchmarking toolkit for adiabatic capacitive neurons.

pub mod baseline;
pub mod bench;
pub mod engine;
pub mod error;
pub mod model;
pub mod neuron;
pub mod units;

pub use error::{Error, Result};
