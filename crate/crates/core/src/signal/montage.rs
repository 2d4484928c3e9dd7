use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::SignalError;

/// Number of electrodes in the headset layout.
pub const CHANNEL_COUNT: usize = 32;

/// Default 32-electrode 10-20 layout, frontal to occipital.
pub const STANDARD_LABELS: [&str; CHANNEL_COUNT] = [
    "FP1", "FP2", "AF3", "AF4", "F7", "F3", "Fz", "F4", "F8", "FC5", "FC1", "FC2", "FC6", "T7",
    "C3", "Cz", "C4", "T8", "CP5", "CP1", "CP2", "CP6", "P7", "P3", "Pz", "P4", "P8", "PO7",
    "PO3", "PO4", "PO8", "Oz",
];

/// Electrodes that the workload model reads from.
pub const REQUIRED_LABELS: [&str; 8] = ["FP1", "FP2", "F8", "T7", "T8", "CP6", "P8", "Oz"];

/// Ordered channel labels of a recording.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct ChannelMontage {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl ChannelMontage {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self, SignalError> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() != CHANNEL_COUNT {
            return Err(SignalError::Montage(format!(
                "expected {CHANNEL_COUNT} channels, got {}",
                labels.len()
            )));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if index.insert(label.clone(), i).is_some() {
                return Err(SignalError::Montage(format!("duplicate channel label {label}")));
            }
        }
        for required in REQUIRED_LABELS {
            if !index.contains_key(required) {
                return Err(SignalError::Montage(format!("missing required channel {required}")));
            }
        }
        Ok(Self { labels, index })
    }

    pub fn standard() -> Self {
        Self::new(STANDARD_LABELS).expect("standard layout is valid")
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }
}

impl Default for ChannelMontage {
    fn default() -> Self {
        Self::standard()
    }
}

impl fmt::Debug for ChannelMontage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("ChannelMontage").field(&self.labels).finish()
    }
}

impl TryFrom<Vec<String>> for ChannelMontage {
    type Error = SignalError;

    fn try_from(labels: Vec<String>) -> Result<Self, Self::Error> {
        Self::new(labels)
    }
}

impl From<ChannelMontage> for Vec<String> {
    fn from(m: ChannelMontage) -> Self {
        m.labels
    }
}
