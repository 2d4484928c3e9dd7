use std::f64::consts::{PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{mix_seed, SubjectProfile, SynthError};
use crate::classifier::WorkloadLabel;
use crate::signal::{expected_len, ChannelMontage, EegEpoch, CHANNEL_COUNT};

/// Theta, alpha and beta oscillator centres.
pub const BAND_CENTERS_HZ: [f64; 3] = [6.0, 10.0, 20.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EegSynthConfig {
    /// Latent oscillators per band shared across channels.
    pub sources_per_band: usize,
    /// Half-width of the per-epoch multiplicative amplitude jitter.
    pub jitter: f64,
    /// Half-width of the per-source frequency spread around the centre, Hz.
    pub frequency_spread: f64,
    /// Mean blink rate; 0 disables ocular artifacts.
    pub blink_rate_hz: f64,
    pub blink_amplitude_uv: f64,
}

impl Default for EegSynthConfig {
    fn default() -> Self {
        Self {
            sources_per_band: 5,
            jitter: 0.1,
            frequency_spread: 0.5,
            blink_rate_hz: 0.0,
            blink_amplitude_uv: 80.0,
        }
    }
}

/// Per-band scalp projections, rows normalised to unit length.
fn mixing(profile_seed: u64, k: usize) -> [Vec<Vec<f64>>; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(profile_seed, 0x313C));
    [0, 1, 2].map(|_| {
        (0..CHANNEL_COUNT)
            .map(|_| {
                let row: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                row.into_iter().map(|v| v / norm).collect()
            })
            .collect()
    })
}

/// Unit-power oscillator with a slow positive envelope.
fn bursty_source(rng: &mut ChaCha8Rng, center: f64, spread: f64, n: usize, fs: f64) -> Vec<f64> {
    let f = center + rng.random_range(-spread..=spread);
    let phase = rng.random_range(0.0..2.0 * PI);
    let env: [(f64, f64, f64); 3] = std::array::from_fn(|_| {
        (rng.random_range(0.02..0.3), rng.random_range(0.0..2.0 * PI), 0.15)
    });
    (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let e = 1.0 + env.iter().map(|(g, p, a)| a * (2.0 * PI * g * t + p).sin()).sum::<f64>();
            SQRT_2 * e * (2.0 * PI * f * t + phase).sin()
        })
        .collect()
}

/// Gaussian noise shaped to a 1/f power spectrum, scaled to `sd`.
fn pink_noise(rng: &mut ChaCha8Rng, planner: &mut FftPlanner<f64>, n: usize, sd: f64) -> Vec<f64> {
    if sd == 0.0 || n < 2 {
        return vec![0.0; n];
    }
    let mut buf: Vec<Complex<f64>> =
        (0..n).map(|_| Complex::new(rng.sample::<f64, _>(StandardNormal), 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    buf[0] = Complex::new(0.0, 0.0);
    for (k, v) in buf.iter_mut().enumerate().skip(1) {
        let bin = k.min(n - k) as f64;
        *v /= bin.sqrt();
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let x: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let scale = sd / var.sqrt().max(1e-300);
    x.into_iter().map(|v| (v - mean) * scale).collect()
}

fn blink_weight(label: &str) -> f64 {
    match label {
        "FP1" | "FP2" => 1.0,
        "AF3" | "AF4" => 0.6,
        "F7" | "F3" | "Fz" | "F4" | "F8" => 0.3,
        _ => 0.05,
    }
}

fn blink_trace(rng: &mut ChaCha8Rng, cfg: &EegSynthConfig, n: usize, fs: f64) -> Vec<f64> {
    let mut out = vec![0.0; n];
    if cfg.blink_rate_hz <= 0.0 {
        return out;
    }
    let width = 0.08 * fs;
    let reach = (4.0 * width).ceil() as usize;
    let mut t = 0.0;
    loop {
        t += -rng.random_range(f64::EPSILON..1.0).ln() / cfg.blink_rate_hz;
        let centre = t * fs;
        if centre >= n as f64 {
            break;
        }
        let amp = cfg.blink_amplitude_uv * rng.random_range(0.7..1.3);
        let c = centre as usize;
        for (i, v) in out.iter_mut().enumerate().take((c + reach).min(n)).skip(c.saturating_sub(reach)) {
            let d = (i as f64 - centre) / width;
            *v += amp * (-0.5 * d * d).exp();
        }
    }
    out
}

pub fn gen_eeg_epoch(
    profile: &SubjectProfile,
    state: WorkloadLabel,
    duration: f64,
    sample_rate: f64,
    trial_seed: u64,
) -> Result<EegEpoch, SynthError> {
    gen_eeg_epoch_with(&EegSynthConfig::default(), profile, state, duration, sample_rate, trial_seed)
}

pub fn gen_eeg_epoch_with(
    config: &EegSynthConfig,
    profile: &SubjectProfile,
    state: WorkloadLabel,
    duration: f64,
    sample_rate: f64,
    trial_seed: u64,
) -> Result<EegEpoch, SynthError> {
    if !(duration > 4.0 && duration.is_finite()) {
        return Err(SynthError::Config(format!("duration {duration} s must exceed 4 s")));
    }
    if !(sample_rate >= 100.0 && sample_rate.is_finite()) {
        return Err(SynthError::Config(format!("sample rate {sample_rate} Hz below 100 Hz")));
    }
    if config.sources_per_band == 0 || !(0.0..1.0).contains(&config.jitter) {
        return Err(SynthError::Config("invalid synthesis configuration".into()));
    }
    profile.validate()?;

    let n = expected_len(sample_rate, duration);
    let k = config.sources_per_band;
    let mix = mixing(profile.seed, k);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(profile.seed, trial_seed));
    let montage = ChannelMontage::standard();

    let sources: Vec<Vec<Vec<f64>>> = BAND_CENTERS_HZ
        .iter()
        .map(|&c| (0..k).map(|_| bursty_source(&mut rng, c, config.frequency_spread, n, sample_rate)).collect())
        .collect();

    let high = state == WorkloadLabel::High;
    let mut planner = FftPlanner::new();
    let blinks = blink_trace(&mut rng, config, n, sample_rate);
    let mut samples = Vec::with_capacity(CHANNEL_COUNT);
    for c in 0..CHANNEL_COUNT {
        let mut row = pink_noise(&mut rng, &mut planner, n, profile.noise_uv);
        for b in 0..3 {
            let jitter = 1.0 + rng.random_range(-config.jitter..=config.jitter);
            let gain = if high { profile.gains[c][b] } else { 1.0 };
            let amp = profile.amplitudes[c][b] * gain * jitter;
            for (s, w) in sources[b].iter().zip(&mix[b][c]) {
                let coef = amp * w;
                for (r, v) in row.iter_mut().zip(s) {
                    *r += coef * v;
                }
            }
        }
        let bw = blink_weight(montage.label(c));
        if config.blink_rate_hz > 0.0 {
            for (r, v) in row.iter_mut().zip(&blinks) {
                *r += bw * v;
            }
        }
        samples.push(row);
    }
    Ok(EegEpoch::new(montage, sample_rate, samples)?)
}
