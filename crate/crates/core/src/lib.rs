//! Simulation and analysis of Mott-insulator relaxation-oscillator neurons.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod analytic;
pub mod cli;
pub mod device;
mod lm;
pub mod stats;
pub mod thermal;
pub mod stochastic;
pub mod transient;
pub mod waveform;

pub use device::{MemristorParams, Phase, TemperatureModel};
pub use waveform::Waveform;
