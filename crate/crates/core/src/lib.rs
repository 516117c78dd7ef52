//! Emitter fingerprint simulation, integrated complex variational mode
//! decomposition (ICVMD) and a toy few-shot identification stack.
//!
//! The crate is organised bottom-up:
//!
//! * [`signal`] builds constant-envelope baseband waveforms and imprints a
//!   power-amplifier fingerprint (Hammerstein or full Volterra) plus AWGN.
//! * [`vmd`] is the frequency-domain ADMM solver for real-valued signals.
//! * [`icvmd`] splits a complex signal into positive/negative analytic halves,
//!   decomposes each side independently and labels the modes by role.
//! * [`nn`] holds the temporal convolutional classifier with a spatial
//!   attention branch, trained with hand-written backpropagation.
//! * [`harness`] generates datasets, extracts features, runs the baseline
//!   classifier and orchestrates the few-shot experiments.

pub mod error;
pub mod harness;
pub mod icvmd;
pub mod iq;
pub mod nn;
pub mod signal;
pub mod spectral;
pub mod vmd;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use signal::ComplexSignal;

/// Version stamped into (and required from) every JSON config and manifest.
pub const SCHEMA_VERSION: u32 = 1;
