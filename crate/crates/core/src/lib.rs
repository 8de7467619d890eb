//! Desk-scale compact-binary search: synthetic two-detector strain, Welch
//! PSDs, matched filtering with a chi-squared veto, time-slide background
//! and false-alarm-rate significance.

pub mod coinc;
pub mod error;
pub mod fft;
pub mod format;
pub mod normal;
pub mod search;
pub mod spectral;
pub mod strain_io;
pub mod synth;
pub mod waveform;

pub use error::{Error, Result};
