//! IIR filter design and zero-phase application.
//!
//! Filters are cascades of second-order sections in transposed direct form II.
//! The Butterworth bandpass is designed from the analog prototype through a
//! lowpass-to-bandpass transform and the prewarped bilinear transform.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{EegEpoch, SignalError};

/// One biquad: `b` numerator, `a` denominator with `a[0] == 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    fn response(&self, w: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        (self.b[0] + self.b[1] * z1 + self.b[2] * z2) / (self.a[0] + self.a[1] * z1 + self.a[2] * z2)
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (self.a[0] + self.a[1] + self.a[2])
    }
}

/// Cascade of second-order sections.
#[derive(Clone, Debug, PartialEq)]
pub struct SosFilter {
    sections: Vec<Biquad>,
}

impl SosFilter {
    pub fn from_sections(sections: Vec<Biquad>) -> Self {
        Self { sections }
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Digital Butterworth bandpass of prototype order `order` (the cascade
    /// has `order` sections, i.e. `2 * order` poles).
    pub fn butterworth_bandpass(
        order: usize,
        lo: f64,
        hi: f64,
        sample_rate: f64,
    ) -> Result<Self, SignalError> {
        let nyquist = sample_rate / 2.0;
        if order == 0 || !(lo > 0.0 && lo < hi && hi < nyquist) {
            return Err(SignalError::Config(format!(
                "bandpass {lo}-{hi} Hz (order {order}) not realisable at {sample_rate} Hz"
            )));
        }
        let fs2 = 2.0 * sample_rate;
        let w1 = fs2 * (std::f64::consts::PI * lo / sample_rate).tan();
        let w2 = fs2 * (std::f64::consts::PI * hi / sample_rate).tan();
        let bw = w2 - w1;
        let w0 = (w1 * w2).sqrt();

        let n = order as f64;
        let mut poles = Vec::with_capacity(2 * order);
        for k in 0..order {
            let m = -(n - 1.0) + 2.0 * k as f64;
            let proto = -Complex64::from_polar(1.0, std::f64::consts::PI * m / (2.0 * n));
            let half = proto * (bw / 2.0);
            let disc = (half * half - w0 * w0).sqrt();
            for s in [half + disc, half - disc] {
                poles.push((fs2 + s) / (fs2 - s));
            }
        }
        let mut upper: Vec<Complex64> = poles.into_iter().filter(|p| p.im > 0.0).collect();
        if upper.len() != order {
            return Err(SignalError::Config(format!(
                "bandpass design produced {} complex pole pairs, expected {order}",
                upper.len()
            )));
        }
        upper.sort_by(|a, b| a.norm().total_cmp(&b.norm()));

        let center = 2.0 * (w0 / fs2).atan();
        let sections = upper
            .into_iter()
            .map(|p| {
                let raw = Biquad { b: [1.0, 0.0, -1.0], a: [1.0, -2.0 * p.re, p.norm_sqr()] };
                let g = 1.0 / raw.response(center).norm();
                Biquad { b: [g, 0.0, -g], a: raw.a }
            })
            .collect();
        Ok(Self { sections })
    }

    /// Second-order IIR notch at `freq` with quality factor `q`.
    pub fn notch(freq: f64, q: f64, sample_rate: f64) -> Result<Self, SignalError> {
        if !(freq > 0.0 && freq < sample_rate / 2.0 && q > 0.0) {
            return Err(SignalError::Config(format!(
                "notch at {freq} Hz (Q {q}) not realisable at {sample_rate} Hz"
            )));
        }
        let w0 = 2.0 * std::f64::consts::PI * freq / sample_rate;
        let beta = (w0 / q / 2.0).tan();
        let gain = 1.0 / (1.0 + beta);
        let c = w0.cos();
        Ok(Self {
            sections: vec![Biquad {
                b: [gain, -2.0 * gain * c, gain],
                a: [1.0, -2.0 * gain * c, 2.0 * gain - 1.0],
            }],
        })
    }

    pub fn then(mut self, other: SosFilter) -> Self {
        self.sections.extend(other.sections);
        self
    }

    /// Complex response of one causal pass at `freq` Hz.
    pub fn response(&self, freq: f64, sample_rate: f64) -> Complex64 {
        let w = 2.0 * std::f64::consts::PI * freq / sample_rate;
        self.sections.iter().map(|s| s.response(w)).product()
    }

    /// Power gain of the forward-backward application at `freq` Hz.
    pub fn zero_phase_power_gain(&self, freq: f64, sample_rate: f64) -> f64 {
        self.response(freq, sample_rate).norm_sqr().powi(2)
    }

    /// Causal filtering from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            run_section(s, &mut y, [0.0, 0.0]);
        }
        y
    }

    /// Zero-phase forward-backward filtering with odd-extension padding and
    /// steady-state initial conditions.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = (3 * (2 * self.sections.len() + 1)).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let zi = self.steady_state();
        let x0 = ext[0];
        for (s, z) in self.sections.iter().zip(&zi) {
            run_section(s, &mut ext, [z[0] * x0, z[1] * x0]);
        }
        ext.reverse();
        let y0 = ext[0];
        for (s, z) in self.sections.iter().zip(&zi) {
            run_section(s, &mut ext, [z[0] * y0, z[1] * y0]);
        }
        ext.reverse();
        ext.drain(..pad);
        ext.truncate(n);
        ext
    }

    /// Per-section state for a unit step input already at steady state.
    fn steady_state(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let g = s.dc_gain();
                let z2 = scale * (s.b[2] - s.a[2] * g);
                let z1 = scale * (s.b[1] - s.a[1] * g) + z2;
                scale *= g;
                [z1, z2]
            })
            .collect()
    }
}

fn run_section(s: &Biquad, x: &mut [f64], state: [f64; 2]) {
    let [b0, b1, b2] = s.b;
    let [_, a1, a2] = s.a;
    let (mut z1, mut z2) = (state[0], state[1]);
    for v in x.iter_mut() {
        let input = *v;
        let y = b0 * input + z1;
        z1 = b1 * input - a1 * y + z2;
        z2 = b2 * input - a2 * y;
        *v = y;
    }
}

/// Settings for the per-trial cleaning filters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub band_lo: f64,
    pub band_hi: f64,
    pub order: usize,
    /// `None` disables the notch.
    pub notch_hz: Option<f64>,
    pub notch_q: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self { band_lo: 3.0, band_hi: 35.0, order: 4, notch_hz: Some(50.0), notch_q: 30.0 }
    }
}

impl PreprocessConfig {
    /// The combined bandpass + notch cascade for `sample_rate`. A notch at or
    /// above Nyquist is dropped, as no such content can be represented.
    pub fn design(&self, sample_rate: f64) -> Result<SosFilter, SignalError> {
        if sample_rate <= 2.0 * self.band_hi {
            return Err(SignalError::Config(format!(
                "sample rate {sample_rate} Hz too low for a {} Hz band edge",
                self.band_hi
            )));
        }
        let mut f = SosFilter::butterworth_bandpass(self.order, self.band_lo, self.band_hi, sample_rate)?;
        if let Some(notch) = self.notch_hz.filter(|&hz| hz < sample_rate / 2.0) {
            f = f.then(SosFilter::notch(notch, self.notch_q, sample_rate)?);
        }
        Ok(f)
    }
}

/// Bandpass and notch filtering of every channel, zero phase.
pub fn preprocess(epoch: &EegEpoch, config: &PreprocessConfig) -> Result<EegEpoch, SignalError> {
    let filter = config.design(epoch.sample_rate())?;
    let samples = epoch.channels().iter().map(|row| filter.filtfilt(row)).collect();
    epoch.with_samples(samples)
}
