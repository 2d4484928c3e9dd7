use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// Post-trial self-ratings on 5-point scales.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRatings")]
pub struct RatingPair {
    /// Instantaneous self-assessment of workload.
    pub isa: u8,
    /// How well the difficulty matched the rater's preference.
    pub f_isa: u8,
}

#[derive(Deserialize)]
struct RawRatings {
    isa: u8,
    f_isa: u8,
}

impl TryFrom<RawRatings> for RatingPair {
    type Error = AnalysisError;

    fn try_from(r: RawRatings) -> Result<Self, Self::Error> {
        RatingPair::new(r.isa, r.f_isa)
    }
}

impl RatingPair {
    pub fn new(isa: u8, f_isa: u8) -> Result<Self, AnalysisError> {
        for (name, v) in [("isa", isa), ("f_isa", f_isa)] {
            if !(1..=5).contains(&v) {
                return Err(AnalysisError::Validation(format!("{name} rating {v} outside 1..=5")));
            }
        }
        Ok(Self { isa, f_isa })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsqScores {
    pub nausea: f64,
    pub oculomotor: f64,
    pub disorientation: f64,
    pub total: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UesScores {
    pub focused_attention: f64,
    pub perceived_usability: f64,
    pub aesthetic_appeal: f64,
    pub reward: f64,
    pub overall: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionnaireScores {
    pub nasa_tlx: f64,
    pub ssq: SsqScores,
    pub ues_sf: UesScores,
}

/// Raw (unweighted) TLX over the six subscales.
pub fn score_nasa_tlx(subscales: &[f64]) -> Result<f64, AnalysisError> {
    if subscales.len() != 6 {
        return Err(AnalysisError::Validation(format!("TLX needs 6 subscales, got {}", subscales.len())));
    }
    if let Some(v) = subscales.iter().find(|v| !(0.0..=100.0).contains(*v)) {
        return Err(AnalysisError::Validation(format!("TLX subscale {v} outside 0..=100")));
    }
    Ok(subscales.iter().sum::<f64>() / 6.0)
}

// 1-based item numbers per SSQ cluster; some items load on two clusters.
const SSQ_NAUSEA: [usize; 7] = [1, 6, 7, 8, 9, 15, 16];
const SSQ_OCULOMOTOR: [usize; 7] = [1, 2, 3, 4, 5, 9, 11];
const SSQ_DISORIENTATION: [usize; 7] = [5, 8, 10, 11, 12, 13, 14];

pub const SSQ_NAUSEA_WEIGHT: f64 = 9.54;
pub const SSQ_OCULOMOTOR_WEIGHT: f64 = 7.58;
pub const SSQ_DISORIENTATION_WEIGHT: f64 = 13.92;
pub const SSQ_TOTAL_WEIGHT: f64 = 3.74;

/// Items in the usual order: general discomfort, fatigue, headache, eyestrain,
/// difficulty focusing, increased salivation, sweating, nausea, difficulty
/// concentrating, fullness of head, blurred vision, dizzy (eyes open), dizzy
/// (eyes closed), vertigo, stomach awareness, burping. Each is 0..=3.
pub fn score_ssq(items: &[u8]) -> Result<SsqScores, AnalysisError> {
    if items.len() != 16 {
        return Err(AnalysisError::Validation(format!("SSQ needs 16 items, got {}", items.len())));
    }
    if let Some(v) = items.iter().find(|v| **v > 3) {
        return Err(AnalysisError::Validation(format!("SSQ item {v} outside 0..=3")));
    }
    let raw = |idx: &[usize]| idx.iter().map(|&i| items[i - 1] as f64).sum::<f64>();
    let (n, o, d) = (raw(&SSQ_NAUSEA), raw(&SSQ_OCULOMOTOR), raw(&SSQ_DISORIENTATION));
    Ok(SsqScores {
        nausea: n * SSQ_NAUSEA_WEIGHT,
        oculomotor: o * SSQ_OCULOMOTOR_WEIGHT,
        disorientation: d * SSQ_DISORIENTATION_WEIGHT,
        total: (n + o + d) * SSQ_TOTAL_WEIGHT,
    })
}

/// Items ordered FA1-3, PU1-3, AE1-3, RW1-3, each 1..=5. PU items are
/// negatively worded and reversed before averaging.
pub fn score_ues_sf(items: &[u8]) -> Result<UesScores, AnalysisError> {
    if items.len() != 12 {
        return Err(AnalysisError::Validation(format!("UES-SF needs 12 items, got {}", items.len())));
    }
    if let Some(v) = items.iter().find(|v| !(1..=5).contains(*v)) {
        return Err(AnalysisError::Validation(format!("UES-SF item {v} outside 1..=5")));
    }
    let mean3 = |s: &[u8], reverse: bool| {
        s.iter().map(|&v| if reverse { 6 - v } else { v } as f64).sum::<f64>() / 3.0
    };
    let fa = mean3(&items[0..3], false);
    let pu = mean3(&items[3..6], true);
    let ae = mean3(&items[6..9], false);
    let rw = mean3(&items[9..12], false);
    Ok(UesScores {
        focused_attention: fa,
        perceived_usability: pu,
        aesthetic_appeal: ae,
        reward: rw,
        overall: (fa + pu + ae + rw) / 4.0,
    })
}
