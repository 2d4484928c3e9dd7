use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ChannelMontage, SignalError};

/// Default recording rate of the headset.
pub const DEFAULT_SAMPLE_RATE: f64 = 250.0;
/// Default trial length in seconds.
pub const DEFAULT_DURATION: f64 = 120.0;

/// One trial of multichannel EEG, in microvolts, channel-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EegEpoch {
    montage: ChannelMontage,
    sample_rate: f64,
    samples: Vec<Vec<f64>>,
}

impl EegEpoch {
    pub fn new(
        montage: ChannelMontage,
        sample_rate: f64,
        samples: Vec<Vec<f64>>,
    ) -> Result<Self, SignalError> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(SignalError::Config(format!("invalid sample rate {sample_rate}")));
        }
        if samples.len() != montage.len() {
            return Err(SignalError::Shape(format!(
                "{} channel rows for a {}-channel montage",
                samples.len(),
                montage.len()
            )));
        }
        let n = samples[0].len();
        if n == 0 {
            return Err(SignalError::Shape("epoch has no samples".into()));
        }
        for (c, row) in samples.iter().enumerate() {
            if row.len() != n {
                return Err(SignalError::Shape(format!(
                    "channel {} has {} samples, expected {n}",
                    montage.label(c),
                    row.len()
                )));
            }
            if let Some(i) = row.iter().position(|v| !v.is_finite()) {
                return Err(SignalError::DataQuality(format!(
                    "non-finite sample at channel {} index {i}",
                    montage.label(c)
                )));
            }
        }
        Ok(Self { montage, sample_rate, samples })
    }

    /// Builds an epoch whose sample count is `round(sample_rate * duration)`.
    pub fn with_duration(
        montage: ChannelMontage,
        sample_rate: f64,
        duration: f64,
        samples: Vec<Vec<f64>>,
    ) -> Result<Self, SignalError> {
        let expected = expected_len(sample_rate, duration);
        if samples.iter().any(|row| row.len() != expected) {
            return Err(SignalError::Shape(format!(
                "{duration} s at {sample_rate} Hz needs {expected} samples per channel"
            )));
        }
        Self::new(montage, sample_rate, samples)
    }

    pub fn montage(&self) -> &ChannelMontage {
        &self.montage
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn n_channels(&self) -> usize {
        self.samples.len()
    }

    pub fn n_samples(&self) -> usize {
        self.samples[0].len()
    }

    pub fn duration(&self) -> f64 {
        self.n_samples() as f64 / self.sample_rate
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn channel(&self, index: usize) -> &[f64] {
        &self.samples[index]
    }

    pub fn channel_by_label(&self, label: &str) -> Option<&[f64]> {
        self.montage.index_of(label).map(|i| self.channel(i))
    }

    pub fn into_samples(self) -> Vec<Vec<f64>> {
        self.samples
    }

    /// Same montage and rate, new samples. Shape and finiteness are rechecked.
    pub fn with_samples(&self, samples: Vec<Vec<f64>>) -> Result<Self, SignalError> {
        Self::new(self.montage.clone(), self.sample_rate, samples)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, SignalError> {
        self.with_samples(
            self.samples.iter().map(|row| row.iter().map(|v| v * factor).collect()).collect(),
        )
    }

    /// Writes the binary epoch format (see `docs/formats.md`).
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), SignalError> {
        let header = FileHeader {
            labels: self.montage.labels().to_vec(),
            sample_rate: self.sample_rate,
            duration: self.duration(),
            n_samples: self.n_samples(),
        };
        let header = serde_json::to_vec(&header).map_err(|e| SignalError::Format(e.to_string()))?;
        w.write_all(EPOCH_MAGIC)?;
        w.write_all(&EPOCH_FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(header.len() as u32).to_le_bytes())?;
        w.write_all(&header)?;
        let mut buf = Vec::with_capacity(self.n_samples() * 8);
        for row in &self.samples {
            buf.clear();
            for v in row {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, SignalError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(truncated)?;
        if &magic != EPOCH_MAGIC {
            return Err(SignalError::Format("not an epoch file (bad magic)".into()));
        }
        let version = read_u32(&mut r)?;
        if version != EPOCH_FORMAT_VERSION {
            return Err(SignalError::Format(format!(
                "unsupported epoch format version {version} (expected {EPOCH_FORMAT_VERSION})"
            )));
        }
        let header_len = read_u32(&mut r)? as usize;
        if header_len > MAX_HEADER_LEN {
            return Err(SignalError::Format(format!("header length {header_len} too large")));
        }
        let mut header = vec![0u8; header_len];
        r.read_exact(&mut header).map_err(truncated)?;
        let header: FileHeader =
            serde_json::from_slice(&header).map_err(|e| SignalError::Format(e.to_string()))?;
        let montage = ChannelMontage::new(header.labels)?;
        if expected_len(header.sample_rate, header.duration) != header.n_samples {
            return Err(SignalError::Format(format!(
                "header inconsistent: {} samples for {} s at {} Hz",
                header.n_samples, header.duration, header.sample_rate
            )));
        }
        let mut samples = Vec::with_capacity(montage.len());
        let mut buf = vec![0u8; header.n_samples * 8];
        for _ in 0..montage.len() {
            r.read_exact(&mut buf).map_err(truncated)?;
            samples.push(
                buf.chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
                    .collect(),
            );
        }
        Self::new(montage, header.sample_rate, samples)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SignalError> {
        let file = std::fs::File::create(path)?;
        let mut w = io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SignalError> {
        let file = std::fs::File::open(path)?;
        Self::read_from(io::BufReader::new(file))
    }
}

pub fn expected_len(sample_rate: f64, duration: f64) -> usize {
    (sample_rate * duration).round() as usize
}

const EPOCH_MAGIC: &[u8; 8] = b"NFEPOCH\0";
const EPOCH_FORMAT_VERSION: u32 = 1;
const MAX_HEADER_LEN: usize = 1 << 20;

#[derive(Serialize, Deserialize)]
struct FileHeader {
    labels: Vec<String>,
    sample_rate: f64,
    duration: f64,
    n_samples: usize,
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, SignalError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn truncated(e: io::Error) -> SignalError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        SignalError::Format("epoch file truncated".into())
    } else {
        SignalError::Io(e)
    }
}
