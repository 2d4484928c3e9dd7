use std::f64::consts::PI;

use neuroflight::classifier::WorkloadLabel;
use neuroflight::signal::spectral::integrate;
use neuroflight::signal::{
    band_power, engagement_index, ica_clean, preprocess, welch_psd, ArtifactConfig, Band, BandSet, ChannelMontage,
    EegEpoch, PreprocessConfig, ENGAGEMENT_EPSILON,
};
use neuroflight::synth::{gen_eeg_epoch, make_subject_profile, Archetype};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const FS: f64 = 250.0;
const N: usize = 30_000;

fn tone(freq: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (2.0 * PI * freq * i as f64 / FS).sin()).collect()
}

fn epoch_of(row: &[f64]) -> EegEpoch {
    EegEpoch::new(ChannelMontage::standard(), FS, vec![row.to_vec(); 32]).unwrap()
}

/// Mean power over the interior, one second trimmed at each end.
fn interior_power(x: &[f64]) -> f64 {
    let t = FS as usize;
    let mid = &x[t..x.len() - t];
    mid.iter().map(|v| v * v).sum::<f64>() / mid.len() as f64
}

fn preprocessed_power_ratio(freq: f64) -> f64 {
    let x = tone(freq, N);
    let y = preprocess(&epoch_of(&x), &PreprocessConfig::default()).unwrap();
    interior_power(y.channel(0)) / interior_power(&x)
}

#[test]
fn dc_is_removed() {
    let y = preprocess(&epoch_of(&vec![100.0; N]), &PreprocessConfig::default()).unwrap();
    assert!(interior_power(y.channel(0)).sqrt() < 0.1);
}

#[test]
fn passband_tones_keep_their_power() {
    for f in [10.0, 20.0] {
        let r = preprocessed_power_ratio(f);
        assert!((0.9..=1.1).contains(&r), "{f} Hz ratio {r}");
    }
}

#[test]
fn mains_tone_is_attenuated_40db() {
    let r = preprocessed_power_ratio(50.0);
    assert!(r <= 1e-4, "50 Hz ratio {r} ({:.1} dB)", 10.0 * r.log10());
}

#[test]
fn unit_alpha_tone_band_powers() {
    let psd = welch_psd(&tone(10.0, N), FS).unwrap();
    let bands = BandSet::default();
    let alpha = band_power(&psd, &bands.get(Band::Alpha)).unwrap();
    let theta = band_power(&psd, &bands.get(Band::Theta)).unwrap();
    let beta = band_power(&psd, &bands.get(Band::Beta)).unwrap();
    assert!((alpha - 0.5).abs() <= 0.025, "alpha {alpha}");
    assert!(theta < 0.01 * alpha && beta < 0.01 * alpha, "theta {theta} beta {beta}");
}

#[test]
fn white_noise_density_integrates_to_variance() {
    for seed in 0..8 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigma = 3.0;
        let x: Vec<f64> = (0..N).map(|_| Normal::new(0.0, sigma).unwrap().sample(&mut rng)).collect();
        let psd = welch_psd(&x, FS).unwrap();
        let total = psd.total_power();
        assert!((total / (sigma * sigma) - 1.0).abs() < 0.1, "seed {seed}: {total}");
        assert!(psd.density.iter().all(|d| *d >= 0.0));
        assert_eq!(psd.frequencies[0], 0.0);
        assert!((psd.frequencies.last().unwrap() - FS / 2.0).abs() < 1e-9);
    }
}

#[test]
fn band_powers_tile_the_analysis_band() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x: Vec<f64> = (0..N).map(|_| Normal::new(0.0, 1.0).unwrap().sample(&mut rng)).collect();
    let psd = welch_psd(&x, FS).unwrap();
    let (f, d) = (&psd.frequencies, &psd.density);
    let bands = BandSet::default();
    let mut edges = vec![3.0];
    for b in bands.iter() {
        edges.push(b.lo);
        edges.push(b.hi);
    }
    edges.push(35.0);
    let pieces: f64 = edges.windows(2).map(|w| integrate(f, d, w[0], w[1])).sum();
    let whole = integrate(f, d, 3.0, 35.0);
    assert!(((pieces - whole) / whole).abs() < 1e-6, "{pieces} vs {whole}");
    let in_bands: f64 = bands.iter().map(|b| band_power(&psd, &b).unwrap()).sum();
    assert!(in_bands < whole);
}

fn blink_template(n: usize) -> Vec<f64> {
    // Gaussian pulses, 0.15 s wide, every 2 s
    (0..n)
        .map(|i| {
            let t = i as f64 / FS;
            let phase = (t % 2.0) - 1.0;
            (-(phase * phase) / (2.0 * 0.15 * 0.15)).exp()
        })
        .collect()
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn clean_epoch() -> EegEpoch {
    let profile = make_subject_profile(21, Archetype::HighWorkload);
    gen_eeg_epoch(&profile, WorkloadLabel::Low, 120.0, FS, 8).unwrap()
}

#[test]
fn ica_removes_injected_blinks() {
    let clean = clean_epoch();
    let background = clean.channel_by_label("FP1").unwrap().iter().map(|v| v * v).sum::<f64>().sqrt()
        / (N as f64).sqrt();
    let template = blink_template(N);
    let t_rms = (template.iter().map(|v| v * v).sum::<f64>() / N as f64).sqrt();
    let scale = 10.0 * background / t_rms;
    let montage = clean.montage().clone();
    let weights = |label: &str| match label {
        "FP1" | "FP2" => 1.0,
        "F3" | "F4" | "F7" | "F8" | "Fz" => 0.4,
        _ => 0.05,
    };
    let rows = clean
        .channels()
        .iter()
        .enumerate()
        .map(|(c, row)| {
            let w = weights(montage.label(c)) * scale;
            row.iter().zip(&template).map(|(v, b)| v + w * b).collect()
        })
        .collect();
    let dirty = clean.with_samples(rows).unwrap();
    let before = pearson(dirty.channel_by_label("FP1").unwrap(), &template);
    let out = ica_clean(&dirty, &ArtifactConfig::default()).unwrap();
    let after = pearson(out.epoch.channel_by_label("FP1").unwrap(), &template);
    assert_eq!(out.warning, None);
    assert!(out.rejected >= 1, "no component rejected: {:?}", out.components);
    assert!(before > 0.9, "{before}");
    assert!(after.abs() < 0.3, "FP1 still tracks the blink: {after}");
}

#[test]
fn ica_leaves_clean_epoch_alone_and_is_idempotent() {
    let clean = clean_epoch();
    let once = ica_clean(&clean, &ArtifactConfig::default()).unwrap();
    assert_eq!(once.rejected, 0, "{:?}", once.components);
    for (a, b) in once.epoch.channels().iter().zip(clean.channels()) {
        let err: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        let norm: f64 = b.iter().map(|y| y * y).sum::<f64>();
        assert!((err / norm).sqrt() < 0.05);
    }
    let twice = ica_clean(&once.epoch, &ArtifactConfig::default()).unwrap();
    assert_eq!(twice.rejected, 0);
}

#[test]
fn engagement_guard_keeps_values_finite() {
    let v = engagement_index(0.0, 0.0, 5.0).unwrap();
    assert!(v.is_finite() && v > 1e12);
    assert_eq!(v, 5.0 / ENGAGEMENT_EPSILON);
}

fn short_epoch(values: &[f64]) -> EegEpoch {
    let n = values.len() / 32;
    EegEpoch::new(ChannelMontage::standard(), FS, values.chunks(n).map(<[f64]>::to_vec).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn preprocess_is_linear(values in prop::collection::vec(-100.0f64..100.0, 32 * 400), a in -50.0f64..50.0) {
        let x = short_epoch(&values);
        let cfg = PreprocessConfig::default();
        let lhs = preprocess(&x.scaled(a).unwrap(), &cfg).unwrap();
        let rhs = preprocess(&x, &cfg).unwrap().scaled(a).unwrap();
        let scale = rhs.channels().iter().flatten().fold(1e-12f64, |m, v| m.max(v.abs()));
        for (p, q) in lhs.channels().iter().flatten().zip(rhs.channels().iter().flatten()) {
            prop_assert!((p - q).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn engagement_is_scale_invariant(t in 0.01f64..100.0, a in 0.01f64..100.0, b in 0.0f64..100.0, k in 0.01f64..100.0) {
        let e1 = engagement_index(t, a, b).unwrap();
        let e2 = engagement_index(k * t, k * a, k * b).unwrap();
        prop_assert!(e1 >= 0.0);
        prop_assert!((e1 - e2).abs() <= 1e-9 * e1.max(1.0));
    }

    #[test]
    fn negative_band_power_is_domain_error(t in -100.0f64..-1e-9) {
        prop_assert!(engagement_index(t, 1.0, 1.0).is_err());
        prop_assert!(engagement_index(1.0, t, 1.0).is_err());
        prop_assert!(engagement_index(1.0, 1.0, t).is_err());
    }

    #[test]
    fn welch_density_is_nonnegative(values in prop::collection::vec(-1e3f64..1e3, 500..2000)) {
        let psd = welch_psd(&values, FS).unwrap();
        prop_assert!(psd.density.iter().all(|d| *d >= 0.0 && d.is_finite()));
    }
}
