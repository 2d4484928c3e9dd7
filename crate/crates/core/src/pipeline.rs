//! Epoch to model input: preprocess, artifact removal, band powers, features.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{assemble_features, select_model_features, FeatureError, FeatureVector128, ModelFeatureVector10};
use crate::signal::{
    epoch_band_powers, ica_clean, preprocess, ArtifactConfig, EegEpoch, IcaWarning, PreprocessConfig, SignalError,
    SpectralConfig,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub preprocess: PreprocessConfig,
    /// `None` skips artifact removal.
    pub artifact: Option<ArtifactConfig>,
    pub spectral: SpectralConfig,
}

impl PipelineConfig {
    pub fn standard() -> Self {
        Self { artifact: Some(ArtifactConfig::default()), ..Self::default() }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub features: FeatureVector128,
    pub rejected_components: usize,
    pub ica_warning: Option<IcaWarning>,
}

impl PipelineOutput {
    pub fn model_input(&self) -> Result<ModelFeatureVector10, FeatureError> {
        select_model_features(&self.features)
    }
}

pub fn extract_features(epoch: &EegEpoch, config: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    let filtered = preprocess(epoch, &config.preprocess)?;
    let (clean, rejected_components, ica_warning) = match &config.artifact {
        Some(a) => {
            let out = ica_clean(&filtered, a)?;
            (out.epoch, out.rejected, out.warning)
        }
        None => (filtered, 0, None),
    };
    let bands = epoch_band_powers(&clean, &config.spectral)?;
    let engagement = bands.engagement()?;
    let features = assemble_features(&bands, &engagement, clean.montage())?;
    Ok(PipelineOutput { features, rejected_components, ica_warning })
}

pub fn extract_model_input(epoch: &EegEpoch, config: &PipelineConfig) -> Result<ModelFeatureVector10, PipelineError> {
    Ok(extract_features(epoch, config)?.model_input()?)
}

/// Runs the pipeline over many epochs in parallel, preserving order.
pub fn extract_batch(epochs: &[EegEpoch], config: &PipelineConfig) -> Result<Vec<PipelineOutput>, PipelineError> {
    epochs.par_iter().map(|e| extract_features(e, config)).collect()
}

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Synth(#[from] crate::synth::SynthError),
    #[error(transparent)]
    Classifier(#[from] crate::classifier::ClassifierError),
}

/// Model-input rows for `per_class` Low and `per_class` High epochs of one
/// synthetic subject, generated and processed in parallel.
pub fn synthetic_dataset(
    profile: &crate::synth::SubjectProfile,
    per_class: usize,
    duration: f64,
    seed: u64,
    config: &PipelineConfig,
) -> Result<crate::classifier::Dataset, TrainingError> {
    use crate::classifier::{Dataset, WorkloadLabel};
    use crate::signal::DEFAULT_SAMPLE_RATE;

    let jobs: Vec<(u64, WorkloadLabel)> = (0..2 * per_class as u64)
        .map(|i| (i, if i % 2 == 0 { WorkloadLabel::Low } else { WorkloadLabel::High }))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(i, state)| -> Result<Vec<f64>, TrainingError> {
            let trial_seed = crate::synth::mix_seed(seed, i);
            let epoch = crate::synth::gen_eeg_epoch(profile, state, duration, DEFAULT_SAMPLE_RATE, trial_seed)?;
            Ok(extract_model_input(&epoch, config)?.0.to_vec())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset::new(rows, jobs.into_iter().map(|(_, l)| l).collect())?)
}

/// Fits the stacking ensemble on a subject's own synthetic signatures.
pub fn train_synthetic_model(
    profile: &crate::synth::SubjectProfile,
    per_class: usize,
    seed: u64,
    config: &PipelineConfig,
) -> Result<crate::classifier::StackingModel, TrainingError> {
    let data = synthetic_dataset(profile, per_class, crate::signal::DEFAULT_DURATION, seed, config)?;
    Ok(crate::classifier::fit_stacking(&data, &crate::classifier::StackingParams::default(), seed)?)
}
