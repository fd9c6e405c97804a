//! Myoelectric decoding pipeline with a synthetic signal front end.
//!
//! The crate is organised along the signal path:
//!
//! ```text
//! synthemg (6 electrodes @ 1 kHz)
//!   -> dsp::expand_channels (21 channels)
//!   -> dsp::FilterModel (low-cost or research-grade chain)
//!   -> dsp::MavWindow (300 ms window, 40 ms hop)
//!   -> baseline subtraction
//!   -> decoder::KalmanModel (6 DOFs clamped to [-1, 1])
//! ```
//!
//! `runtime` wires these stages into a producer/consumer loop, `datastore`
//! persists sessions as CSV and `evalkit` scores decoders (SNR, intended and
//! unintended RMSE, DOF sweeps, TOST equivalence bounds).

pub mod datastore;
pub mod decoder;
pub mod dsp;
pub mod error;
pub mod evalkit;
pub mod runtime;
pub mod synthemg;

pub use error::{Error, Result};

/// Sample rate of the electrode stream.
pub const SAMPLE_RATE_HZ: f64 = 1000.0;
/// Number of single-ended recording electrodes.
pub const N_ELECTRODES: usize = 6;
/// 6 single-ended channels plus C(6,2) differential pairs.
pub const N_CHANNELS: usize = 21;
/// Number of decoded degrees of freedom.
pub const N_DOFS: usize = 6;
/// Control/feature cadence in samples (40 ms at 1 kHz).
pub const HOP_SAMPLES: usize = 40;
/// MAV window length in samples (300 ms at 1 kHz).
pub const WINDOW_SAMPLES: usize = 300;
