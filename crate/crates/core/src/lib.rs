//! Coexistence simulator for a filter-bank (OFDM/OQAM, PHYDYAS) secondary user
//! inserted next to a CP-OFDM incumbent.
//!
//! The crate contrasts two ways of rating the interference a secondary
//! subcarrier injects onto an incumbent subcarrier at spectral distance `l`:
//!
//! * the transmit-PSD model, which integrates the aggressor's power spectral
//!   density over the victim subcarrier band ([`psd`]);
//! * the post-demodulation error-vector model, which runs the victim's actual
//!   receiver (CP removal + FFT on `M`-sample windows) on the aggressor signal
//!   and measures `E|d̂ - d|²` ([`interference`]).
//!
//! The resulting tables feed the two decision problems in [`coexistence`]:
//! guard-band sizing and interference-constrained power allocation.
//!
//! All frequencies are expressed in units of the subcarrier spacing and all
//! powers are normalized to unit symbol variance.

pub mod cli;
pub mod coexistence;
pub mod error;
pub mod interference;
pub mod psd;
pub mod rng;
pub mod waveform;

pub use error::{Error, Result};

/// Converts a linear power ratio to decibels.
pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Converts decibels to a linear power ratio.
pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
