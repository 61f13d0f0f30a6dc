//! Harmonic inversion of short-time autocorrelation signals, with upper
//! bounds on the frequency-extraction error.
//!
//! The pipeline recovers the number of modes, their frequencies and their
//! populations from samples `c_n = Σ_k d_k exp(-i ω_k n δt)`, and
//! [`bounds`] evaluates how far the recovered frequencies can stray from
//! the true ones for a given noise ceiling.

pub mod bounds;
pub mod cli;
pub mod error;
pub mod harness;
pub mod inversion;
pub mod matrix;
pub mod signal;

pub use error::{Error, Result};
pub use signal::{
    apply_noise, synthesize_autocorrelation, AutocorrSeries, FrequencyModel, NoiseKind, NoiseSpec,
    SamplingGrid,
};
