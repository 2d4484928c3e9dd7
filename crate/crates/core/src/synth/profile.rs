use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{mix_seed, SynthError};
use crate::adaptation::DifficultyLevel;
use crate::classifier::WorkloadLabel;
use crate::signal::{ChannelMontage, CHANNEL_COUNT};

/// Channels whose band amplitudes move with workload.
pub const SIGNATURE_CHANNELS: [&str; 8] = ["P8", "F8", "T8", "Oz", "T7", "CP6", "FP1", "FP2"];
const FRONTAL_THETA: [&str; 4] = ["FP1", "FP2", "F8", "T7"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "threshold", rename_all = "snake_case")]
pub enum Archetype {
    /// Never shows the High signature.
    LowWorkload,
    /// Always shows the High signature.
    HighWorkload,
    /// High at or above the given difficulty.
    Threshold(DifficultyLevel),
}

impl fmt::Display for Archetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Archetype::LowWorkload => f.write_str("low"),
            Archetype::HighWorkload => f.write_str("high"),
            Archetype::Threshold(t) => write!(f, "threshold:{t}"),
        }
    }
}

impl FromStr for Archetype {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "low" | "low-workload" | "low_workload" => return Ok(Archetype::LowWorkload),
            "high" | "high-workload" | "high_workload" => return Ok(Archetype::HighWorkload),
            _ => {}
        }
        let level = s
            .strip_prefix("threshold:")
            .or_else(|| s.strip_prefix("threshold="))
            .and_then(|v| v.parse::<i64>().ok())
            .ok_or_else(|| SynthError::Config(format!("unknown archetype {s:?}")))?;
        DifficultyLevel::new(level)
            .map(Archetype::Threshold)
            .map_err(|e| SynthError::Config(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub seed: u64,
    pub archetype: Archetype,
    /// Baseline theta/alpha/beta oscillator amplitude per channel, µV.
    pub amplitudes: Vec<[f64; 3]>,
    /// Multipliers applied to `amplitudes` under High workload.
    pub gains: Vec<[f64; 3]>,
    /// Standard deviation of the per-channel pink background, µV.
    pub noise_uv: f64,
    /// Scales telemetry deviation noise; 0 flies the targets exactly.
    pub skill: f64,
}

impl SubjectProfile {
    /// Difficulty at or above which the latent state is High, if any.
    pub fn threshold(&self) -> Option<DifficultyLevel> {
        match self.archetype {
            Archetype::LowWorkload => None,
            Archetype::HighWorkload => Some(DifficultyLevel::MIN),
            Archetype::Threshold(t) => Some(t),
        }
    }

    pub fn latent_state(&self, difficulty: DifficultyLevel) -> WorkloadLabel {
        match self.threshold() {
            Some(t) if difficulty >= t => WorkloadLabel::High,
            _ => WorkloadLabel::Low,
        }
    }

    pub fn with_archetype(mut self, archetype: Archetype) -> Self {
        self.archetype = archetype;
        self
    }

    pub fn with_skill(mut self, skill: f64) -> Self {
        self.skill = skill;
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.amplitudes.len() != CHANNEL_COUNT || self.gains.len() != CHANNEL_COUNT {
            return Err(SynthError::Config("profile tables must have one row per channel".into()));
        }
        if self.gains.iter().flatten().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(SynthError::Config("workload gains must be positive".into()));
        }
        if self.amplitudes.iter().flatten().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(SynthError::Config("amplitudes must be non-negative".into()));
        }
        if !(self.skill >= 0.0 && self.skill.is_finite()) || !(self.noise_uv >= 0.0 && self.noise_uv.is_finite()) {
            return Err(SynthError::Config("skill and noise must be non-negative".into()));
        }
        Ok(())
    }
}

pub fn make_subject_profile(seed: u64, archetype: Archetype) -> SubjectProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x5B1EC7));
    let montage = ChannelMontage::standard();
    let base = [5.0, 8.0, 3.0];
    let mut amplitudes = Vec::with_capacity(CHANNEL_COUNT);
    let mut gains = Vec::with_capacity(CHANNEL_COUNT);
    for c in 0..CHANNEL_COUNT {
        let label = montage.label(c);
        let posterior = label.starts_with('P') || label.starts_with('O');
        let mut amp = base.map(|b| b * rng.random_range(0.8..1.2));
        if posterior {
            amp[1] *= 1.3;
        }
        amplitudes.push(amp);

        let mut g = [1.0; 3];
        if SIGNATURE_CHANNELS.contains(&label) {
            g[2] = rng.random_range(1.5..1.8);
            g[1] = rng.random_range(0.55..0.7);
            if FRONTAL_THETA.contains(&label) {
                g[0] = rng.random_range(1.3..1.5);
            }
        }
        gains.push(g);
    }
    SubjectProfile {
        seed,
        archetype,
        amplitudes,
        gains,
        noise_uv: 2.0,
        skill: rng.random_range(0.6..1.4),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_valid() {
        let a = make_subject_profile(7, Archetype::HighWorkload);
        assert_eq!(a, make_subject_profile(7, Archetype::HighWorkload));
        assert_ne!(a, make_subject_profile(8, Archetype::HighWorkload));
        a.validate().unwrap();
    }

    #[test]
    fn latent_state_follows_archetype() {
        let lvl = |v| DifficultyLevel::new(v).unwrap();
        let low = make_subject_profile(1, Archetype::LowWorkload);
        let high = low.clone().with_archetype(Archetype::HighWorkload);
        let t3 = low.clone().with_archetype(Archetype::Threshold(lvl(3)));
        for v in 1..=5 {
            assert_eq!(low.latent_state(lvl(v)), WorkloadLabel::Low);
            assert_eq!(high.latent_state(lvl(v)), WorkloadLabel::High);
            assert_eq!(t3.latent_state(lvl(v)) == WorkloadLabel::High, v >= 3);
        }
    }

    #[test]
    fn archetype_parsing() {
        assert_eq!("high".parse::<Archetype>().unwrap(), Archetype::HighWorkload);
        assert_eq!(
            "threshold:4".parse::<Archetype>().unwrap(),
            Archetype::Threshold(DifficultyLevel::new(4).unwrap())
        );
        assert!("threshold:9".parse::<Archetype>().is_err());
        for a in [Archetype::LowWorkload, Archetype::Threshold(DifficultyLevel::MAX)] {
            assert_eq!(a.to_string().parse::<Archetype>().unwrap(), a);
        }
    }
}
