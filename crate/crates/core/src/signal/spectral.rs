use std::fmt;
use std::sync::Arc;

use rustfft::{num_complex::Complex64, Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{EegEpoch, SignalError};

/// Guard added to the engagement-index denominator, in µV².
pub const ENGAGEMENT_EPSILON: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Theta,
    Alpha,
    Beta,
}

impl Band {
    pub const ALL: [Band; 3] = [Band::Theta, Band::Alpha, Band::Beta];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Band::Theta => "theta",
            Band::Alpha => "alpha",
            Band::Beta => "beta",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Frequency range of one band, inside the analysis bandpass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandDefinition {
    pub band: Band,
    pub lo: f64,
    pub hi: f64,
}

impl BandDefinition {
    pub fn new(band: Band, lo: f64, hi: f64) -> Result<Self, SignalError> {
        if !(3.0..=35.0).contains(&lo) || !(3.0..=35.0).contains(&hi) || lo >= hi {
            return Err(SignalError::Config(format!(
                "{band} band {lo}-{hi} Hz must satisfy 3 <= lo < hi <= 35"
            )));
        }
        Ok(Self { band, lo, hi })
    }
}

/// The three analysis bands, indexable by [`Band`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandSet([BandDefinition; 3]);

impl BandSet {
    pub fn new(theta: (f64, f64), alpha: (f64, f64), beta: (f64, f64)) -> Result<Self, SignalError> {
        Ok(Self([
            BandDefinition::new(Band::Theta, theta.0, theta.1)?,
            BandDefinition::new(Band::Alpha, alpha.0, alpha.1)?,
            BandDefinition::new(Band::Beta, beta.0, beta.1)?,
        ]))
    }

    pub fn get(&self, band: Band) -> BandDefinition {
        self.0[band.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = BandDefinition> + '_ {
        self.0.iter().copied()
    }
}

impl Default for BandSet {
    /// theta 4-7 Hz, alpha 8-12 Hz, beta 13-30 Hz.
    fn default() -> Self {
        Self::new((4.0, 7.0), (8.0, 12.0), (13.0, 30.0)).expect("default bands are valid")
    }
}

/// One-sided power spectral density.
#[derive(Clone, Debug, PartialEq)]
pub struct Psd {
    pub frequencies: Vec<f64>,
    pub density: Vec<f64>,
}

impl Psd {
    pub fn resolution(&self) -> f64 {
        self.frequencies.get(1).copied().unwrap_or(0.0)
    }

    /// Trapezoidal integral of the density over the whole frequency range.
    pub fn total_power(&self) -> f64 {
        let (lo, hi) = (self.frequencies[0], *self.frequencies.last().expect("non-empty"));
        integrate(&self.frequencies, &self.density, lo, hi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WelchConfig {
    pub window_seconds: f64,
    pub overlap: f64,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self { window_seconds: 2.0, overlap: 0.5 }
    }
}

/// Welch estimator with Hann windows, mean-removed segments and density
/// scaling. Holds its FFT plan so it can be reused across channels.
pub struct Welch {
    sample_rate: f64,
    segment: usize,
    step: usize,
    window: Vec<f64>,
    window_power: f64,
    fft: Arc<dyn Fft<f64>>,
}

impl Welch {
    pub fn new(sample_rate: f64, config: &WelchConfig) -> Result<Self, SignalError> {
        let segment = (config.window_seconds * sample_rate).round() as usize;
        if segment < 2 || !(0.0..1.0).contains(&config.overlap) {
            return Err(SignalError::Config(format!(
                "invalid Welch settings {config:?} at {sample_rate} Hz"
            )));
        }
        let step = ((segment as f64) * (1.0 - config.overlap)).round().max(1.0) as usize;
        let window: Vec<f64> = (0..segment)
            .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / segment as f64).cos())
            .collect();
        let window_power = window.iter().map(|w| w * w).sum();
        let fft = FftPlanner::new().plan_fft_forward(segment);
        Ok(Self { sample_rate, segment, step, window, window_power, fft })
    }

    pub fn segment_len(&self) -> usize {
        self.segment
    }

    pub fn estimate(&self, x: &[f64]) -> Result<Psd, SignalError> {
        if x.len() < self.segment {
            return Err(SignalError::Length { needed: self.segment, got: x.len() });
        }
        let n_bins = self.segment / 2 + 1;
        let mut acc = vec![0.0; n_bins];
        let mut buf = vec![Complex64::new(0.0, 0.0); self.segment];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        let mut count = 0usize;
        let mut start = 0;
        while start + self.segment <= x.len() {
            let seg = &x[start..start + self.segment];
            let mean = seg.iter().sum::<f64>() / self.segment as f64;
            for ((b, v), w) in buf.iter_mut().zip(seg).zip(&self.window) {
                *b = Complex64::new((v - mean) * w, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (a, b) in acc.iter_mut().zip(&buf) {
                *a += b.norm_sqr();
            }
            count += 1;
            start += self.step;
        }
        let scale = 1.0 / (self.sample_rate * self.window_power * count as f64);
        let nyquist_bin = if self.segment % 2 == 0 { Some(n_bins - 1) } else { None };
        let density = acc
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let one_sided = if k == 0 || Some(k) == nyquist_bin { 1.0 } else { 2.0 };
                a * scale * one_sided
            })
            .collect();
        let df = self.sample_rate / self.segment as f64;
        let frequencies = (0..n_bins).map(|k| k as f64 * df).collect();
        Ok(Psd { frequencies, density })
    }
}

/// Welch PSD with the default 2 s Hann windows at 50% overlap.
pub fn welch_psd(x: &[f64], sample_rate: f64) -> Result<Psd, SignalError> {
    Welch::new(sample_rate, &WelchConfig::default())?.estimate(x)
}

/// Trapezoidal band power; band edges falling between bins are linearly
/// interpolated so adjacent bands add up exactly.
pub fn band_power(psd: &Psd, band: &BandDefinition) -> Result<f64, SignalError> {
    let (f0, f1) = (psd.frequencies[0], *psd.frequencies.last().expect("non-empty"));
    if band.lo < f0 || band.hi > f1 {
        return Err(SignalError::Config(format!(
            "{} band {}-{} Hz outside estimated range {f0}-{f1} Hz",
            band.band, band.lo, band.hi
        )));
    }
    Ok(integrate(&psd.frequencies, &psd.density, band.lo, band.hi).max(0.0))
}

/// Trapezoid rule over `[lo, hi]` on a piecewise-linear interpolant.
pub fn integrate(freqs: &[f64], density: &[f64], lo: f64, hi: f64) -> f64 {
    let interp = |f: f64| -> f64 {
        let k = freqs.partition_point(|&x| x <= f).clamp(1, freqs.len() - 1);
        let (x0, x1) = (freqs[k - 1], freqs[k]);
        let t = (f - x0) / (x1 - x0);
        density[k - 1] + t * (density[k] - density[k - 1])
    };
    let mut total = 0.0;
    let mut prev_f = lo;
    let mut prev_d = interp(lo);
    for (&f, &d) in freqs.iter().zip(density) {
        if f <= lo {
            continue;
        }
        if f >= hi {
            break;
        }
        total += 0.5 * (prev_d + d) * (f - prev_f);
        prev_f = f;
        prev_d = d;
    }
    total + 0.5 * (prev_d + interp(hi)) * (hi - prev_f)
}

/// `beta / (alpha + theta + ε)`.
pub fn engagement_index(theta: f64, alpha: f64, beta: f64) -> Result<f64, SignalError> {
    for (name, v) in [("theta", theta), ("alpha", alpha), ("beta", beta)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(SignalError::Domain(format!("{name} power must be finite and >= 0, got {v}")));
        }
    }
    Ok(beta / (alpha + theta + ENGAGEMENT_EPSILON))
}

/// Per-channel powers in µV², columns ordered theta, alpha, beta.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandPowerTable {
    powers: Vec<[f64; 3]>,
}

impl BandPowerTable {
    pub fn new(powers: Vec<[f64; 3]>) -> Result<Self, SignalError> {
        if powers.iter().flatten().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(SignalError::Domain("band powers must be finite and >= 0".into()));
        }
        Ok(Self { powers })
    }

    pub fn n_channels(&self) -> usize {
        self.powers.len()
    }

    pub fn get(&self, channel: usize, band: Band) -> f64 {
        self.powers[channel][band.index()]
    }

    pub fn rows(&self) -> &[[f64; 3]] {
        &self.powers
    }

    pub fn engagement(&self) -> Result<EngagementTable, SignalError> {
        let values = self
            .powers
            .iter()
            .map(|[t, a, b]| engagement_index(*t, *a, *b))
            .collect::<Result<_, _>>()?;
        Ok(EngagementTable { values })
    }
}

/// Per-channel engagement index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngagementTable {
    values: Vec<f64>,
}

impl EngagementTable {
    pub fn new(values: Vec<f64>) -> Result<Self, SignalError> {
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(SignalError::Domain("engagement values must be finite and >= 0".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub bands: BandSet,
    pub welch: WelchConfig,
    /// Seconds dropped from each end of the filtered epoch.
    pub trim_seconds: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self { bands: BandSet::default(), welch: WelchConfig::default(), trim_seconds: 1.0 }
    }
}

/// Band powers of every channel over the epoch with its edges trimmed.
pub fn epoch_band_powers(epoch: &EegEpoch, config: &SpectralConfig) -> Result<BandPowerTable, SignalError> {
    let trim = (config.trim_seconds * epoch.sample_rate()).round() as usize;
    let n = epoch.n_samples();
    if 2 * trim >= n {
        return Err(SignalError::Length { needed: 2 * trim + 1, got: n });
    }
    let welch = Welch::new(epoch.sample_rate(), &config.welch)?;
    let powers = epoch
        .channels()
        .iter()
        .map(|row| {
            let psd = welch.estimate(&row[trim..n - trim])?;
            let mut out = [0.0; 3];
            for def in config.bands.iter() {
                out[def.band.index()] = band_power(&psd, &def)?;
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>, SignalError>>()?;
    BandPowerTable::new(powers)
}
