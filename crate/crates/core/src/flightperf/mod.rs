//! Pitch and roll deviation scoring.
//!
//! Each trial is scored by the RMSE of pitch and of roll against the task's
//! target attitude; the two are summed. Medium turns are segmented into
//! level / banked / level parts by an exact change-in-mean search on roll.

mod telemetry;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adaptation::TaskKind;

pub use telemetry::{FlightTelemetry, MAX_TELEMETRY_RATE};

/// Bank angle held during the medium turn.
pub const TURN_ROLL_DEG: f64 = 30.0;
/// Shortest segment the changepoint search will produce, in seconds.
pub const MIN_SEGMENT_SECONDS: f64 = 0.5;

#[derive(Debug, Error)]
pub enum FlightPerfError {
    #[error("shape: {0}")]
    Shape(String),
    #[error("series of {got} samples cannot hold {segments} segments of {min_segment}")]
    Length { got: usize, segments: usize, min_segment: usize },
    #[error("turn segmentation failed: {0}")]
    Segmentation(String),
    #[error("config: {0}")]
    Config(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FlightPerfError>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerformanceScore {
    pub pitch_rmse: f64,
    pub roll_rmse: f64,
    pub summed: f64,
}

impl PerformanceScore {
    pub fn new(pitch_rmse: f64, roll_rmse: f64) -> Self {
        Self { pitch_rmse, roll_rmse, summed: pitch_rmse + roll_rmse }
    }
}

/// Per-sample target attitude for one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetParameters {
    pub pitch_target: Vec<f64>,
    pub roll_target: Vec<f64>,
    pub segmentation: Option<(usize, usize)>,
}

impl TargetParameters {
    pub fn level(n: usize) -> Self {
        Self { pitch_target: vec![0.0; n], roll_target: vec![0.0; n], segmentation: None }
    }

    /// Level flight with the bank held over `[start, end)`.
    pub fn turn(n: usize, start: usize, end: usize) -> Self {
        let mut t = Self::level(n);
        for v in &mut t.roll_target[start.min(n)..end.min(n)] {
            *v = TURN_ROLL_DEG;
        }
        t.segmentation = Some((start, end));
        t
    }

    pub fn for_task(telemetry: &FlightTelemetry, task: TaskKind) -> Result<Self> {
        let n = telemetry.len();
        match task {
            TaskKind::Deceleration => Ok(Self::level(n)),
            TaskKind::MediumTurn => {
                let (s, e) = segment_turn(telemetry.roll(), telemetry.sample_rate())?;
                Ok(Self::turn(n, s, e))
            }
        }
    }
}

pub fn rmse_axis(series: &[f64], target: &[f64]) -> Result<f64> {
    if series.is_empty() || series.len() != target.len() {
        return Err(FlightPerfError::Shape(format!(
            "series of {} against target of {}",
            series.len(),
            target.len()
        )));
    }
    let ss: f64 = series.iter().zip(target).map(|(s, t)| (s - t) * (s - t)).sum();
    Ok((ss / series.len() as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChangepointConfig {
    pub max_changes: usize,
    pub min_segment: usize,
    /// Cost added per change. `None` uses `2 σ² ln n` with σ estimated from
    /// the median absolute deviation of first differences.
    pub penalty: Option<f64>,
}

impl ChangepointConfig {
    pub fn new(max_changes: usize, min_segment: usize) -> Self {
        Self { max_changes, min_segment, penalty: None }
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Robust noise scale: MAD of first differences, rescaled to a Gaussian σ.
pub fn noise_sigma(series: &[f64]) -> f64 {
    if series.len() < 2 {
        return 0.0;
    }
    let mut d: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    let med = median(&mut d);
    let mut dev: Vec<f64> = d.iter().map(|x| (x - med).abs()).collect();
    1.482_602_218_505_602 * median(&mut dev) / std::f64::consts::SQRT_2
}

pub fn default_penalty(series: &[f64]) -> f64 {
    let s = noise_sigma(series);
    2.0 * s * s * (series.len() as f64).ln()
}

/// Squared deviation from the mean over `[i, j)`, via prefix sums.
struct SegmentCost {
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl SegmentCost {
    fn new(series: &[f64]) -> Self {
        let mean = series.iter().sum::<f64>() / series.len() as f64;
        let mut s1 = Vec::with_capacity(series.len() + 1);
        let mut s2 = Vec::with_capacity(series.len() + 1);
        let (mut a, mut b) = (0.0, 0.0);
        s1.push(0.0);
        s2.push(0.0);
        for &x in series {
            let c = x - mean;
            a += c;
            b += c * c;
            s1.push(a);
            s2.push(b);
        }
        Self { s1, s2 }
    }

    #[inline]
    fn cost(&self, i: usize, j: usize) -> f64 {
        let s = self.s1[j] - self.s1[i];
        ((self.s2[j] - self.s2[i]) - s * s / (j - i) as f64).max(0.0)
    }
}

/// Exact penalized change-in-mean segmentation.
///
/// Returns the sorted start indices of every segment after the first. Among
/// models with equal penalized cost the one with fewer changes wins.
pub fn detect_changepoints(series: &[f64], cfg: &ChangepointConfig) -> Result<Vec<usize>> {
    let n = series.len();
    let m = cfg.min_segment.max(1);
    if cfg.max_changes == 0 {
        return Err(FlightPerfError::Config("max_changes must be at least 1".into()));
    }
    if n < 2 * m {
        return Err(FlightPerfError::Length { got: n, segments: 2, min_segment: m });
    }
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(FlightPerfError::Shape(format!("non-finite sample at {i}")));
    }
    let penalty = match cfg.penalty {
        Some(p) if p >= 0.0 => p,
        Some(p) => return Err(FlightPerfError::Config(format!("negative penalty {p}"))),
        None => default_penalty(series),
    };
    let kmax = cfg.max_changes.min(n / m - 1);
    let sc = SegmentCost::new(series);

    // best[k][j]: optimal cost of [0, j) with k changes; arg[k][j]: last change.
    let mut best = vec![vec![f64::INFINITY; n + 1]; kmax + 1];
    let mut arg = vec![vec![0usize; n + 1]; kmax + 1];
    for j in m..=n {
        best[0][j] = sc.cost(0, j);
    }
    for k in 1..=kmax {
        let (prev, cur) = best.split_at_mut(k);
        let (prev, cur) = (&prev[k - 1], &mut cur[0]);
        for j in (k + 1) * m..=n {
            let mut bv = f64::INFINITY;
            let mut bi = 0;
            for i in k * m..=j - m {
                let v = prev[i] + sc.cost(i, j);
                if v < bv {
                    bv = v;
                    bi = i;
                }
            }
            cur[j] = bv;
            arg[k][j] = bi;
        }
    }

    let eps = 1e-10 * sc.s2[n] + 1e-300;
    let mut chosen = 0;
    let mut chosen_val = best[0][n];
    for (k, row) in best.iter().enumerate().skip(1) {
        let v = row[n] + k as f64 * penalty;
        if v < chosen_val - eps {
            chosen = k;
            chosen_val = v;
        }
    }

    let mut cps = Vec::with_capacity(chosen);
    let mut j = n;
    for k in (1..=chosen).rev() {
        let i = arg[k][j];
        cps.push(i);
        j = i;
    }
    cps.reverse();
    Ok(cps)
}

/// Start and end of the banked segment of a medium turn.
pub fn segment_turn(roll: &[f64], sample_rate: f64) -> Result<(usize, usize)> {
    let min_segment = (MIN_SEGMENT_SECONDS * sample_rate).round().max(1.0) as usize;
    let cps = detect_changepoints(roll, &ChangepointConfig::new(2, min_segment))?;
    match cps[..] {
        [s, e] if s < e => Ok((s, e)),
        _ => Err(FlightPerfError::Segmentation(format!("found {} roll changepoints, need 2", cps.len()))),
    }
}

pub fn score_against(telemetry: &FlightTelemetry, targets: &TargetParameters) -> Result<PerformanceScore> {
    let pitch = rmse_axis(telemetry.pitch(), &targets.pitch_target)?;
    let roll = rmse_axis(telemetry.roll(), &targets.roll_target)?;
    Ok(PerformanceScore::new(pitch, roll))
}

pub fn score_performance(telemetry: &FlightTelemetry, task: TaskKind) -> Result<PerformanceScore> {
    score_against(telemetry, &TargetParameters::for_task(telemetry, task)?)
}
