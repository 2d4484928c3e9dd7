//! Seeded stand-ins for the pilot and the aircraft.
//!
//! EEG is a mix of shared bursty oscillators (6, 10 and 20 Hz) projected onto
//! the scalp through a fixed per-subject mixing matrix, plus independent pink
//! noise per channel. Under High workload the feature-bearing channels gain
//! beta, lose alpha and (frontally) gain theta. This is a synthetic
//! convention chosen to make those channels discriminative.

mod eeg;
mod flight;
mod profile;

use thiserror::Error;

pub use eeg::{gen_eeg_epoch, EegSynthConfig, BAND_CENTERS_HZ};
pub use flight::{gen_flight_telemetry, gen_flight_telemetry_with, TelemetryConfig, LEVEL_NOISE_SCALE};
pub use profile::{make_subject_profile, Archetype, SubjectProfile, SIGNATURE_CHANNELS};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Signal(#[from] crate::signal::SignalError),
    #[error(transparent)]
    Flight(#[from] crate::flightperf::FlightPerfError),
}

/// Mixes two seeds into one well-spread stream seed.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
