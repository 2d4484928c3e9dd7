//! Per-trial EEG cleaning and spectral feature primitives.

mod epoch;
pub mod filter;
pub mod ica;
mod montage;
pub mod spectral;

pub use epoch::{expected_len, EegEpoch, DEFAULT_DURATION, DEFAULT_SAMPLE_RATE};
pub use filter::{preprocess, PreprocessConfig, SosFilter};
pub use ica::{ica_clean, ArtifactConfig, IcaOutcome, IcaWarning};
pub use montage::{ChannelMontage, CHANNEL_COUNT, REQUIRED_LABELS, STANDARD_LABELS};
pub use spectral::{
    band_power, engagement_index, epoch_band_powers, welch_psd, Band, BandDefinition, BandPowerTable,
    BandSet, EngagementTable, Psd, SpectralConfig, Welch, WelchConfig, ENGAGEMENT_EPSILON,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("data quality: {0}")]
    DataQuality(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("signal too short: need at least {needed} samples, got {got}")]
    Length { needed: usize, got: usize },
    #[error("domain: {0}")]
    Domain(String),
    #[error("montage: {0}")]
    Montage(String),
    #[error("shape: {0}")]
    Shape(String),
    #[error("epoch file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
