//! Automatic ocular-artifact removal.
//!
//! The centred epoch is whitened onto its leading principal components and
//! unmixed with symmetric FastICA (log-cosh contrast). A component is rejected
//! when it tracks the mean of the two frontopolar channels and most of its
//! power sits in the slow band typical of blinks. Rejected components are
//! projected out in sensor space; everything else, including the discarded
//! principal subspace, is left untouched.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::spectral::{integrate, welch_psd};
use super::{EegEpoch, SignalError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactConfig {
    pub n_components: usize,
    /// Minimum |correlation| with the frontopolar reference.
    pub correlation_threshold: f64,
    /// Minimum share of component power below `low_cutoff_hz`.
    pub low_power_fraction: f64,
    pub low_cutoff_hz: f64,
    pub reference_channels: Vec<String>,
    pub max_iter: usize,
    pub tolerance: f64,
    /// Fit the unmixing on every `decimate`-th sample.
    pub decimate: usize,
    pub seed: u64,
}

impl Default for ArtifactConfig {
    fn default() -> Self {
        Self {
            n_components: 15,
            correlation_threshold: 0.7,
            low_power_fraction: 0.6,
            low_cutoff_hz: 5.0,
            reference_channels: vec!["FP1".into(), "FP2".into()],
            max_iter: 500,
            tolerance: 1e-4,
            decimate: 3,
            seed: 0x1CA,
        }
    }
}

impl ArtifactConfig {
    fn validate(&self) -> Result<(), SignalError> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.correlation_threshold) || !unit(self.low_power_fraction) {
            return Err(SignalError::Config("ICA thresholds must lie in (0, 1)".into()));
        }
        if self.n_components == 0 || self.decimate == 0 || self.max_iter == 0 {
            return Err(SignalError::Config("ICA sizes must be positive".into()));
        }
        if self.reference_channels.is_empty() {
            return Err(SignalError::Config("ICA needs at least one reference channel".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IcaWarning {
    /// FastICA hit `max_iter`; the epoch was passed through unchanged.
    NotConverged,
    /// Covariance was (numerically) zero; the epoch was passed through unchanged.
    Degenerate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComponentScore {
    pub correlation: f64,
    pub low_power_fraction: f64,
    pub rejected: bool,
}

#[derive(Clone, Debug)]
pub struct IcaOutcome {
    pub epoch: EegEpoch,
    pub rejected: usize,
    pub components: Vec<ComponentScore>,
    pub warning: Option<IcaWarning>,
    pub iterations: usize,
}

impl IcaOutcome {
    fn passthrough(epoch: &EegEpoch, warning: IcaWarning, iterations: usize) -> Self {
        Self { epoch: epoch.clone(), rejected: 0, components: Vec::new(), warning: Some(warning), iterations }
    }
}

pub fn ica_clean(epoch: &EegEpoch, config: &ArtifactConfig) -> Result<IcaOutcome, SignalError> {
    config.validate()?;
    let reference_idx = config
        .reference_channels
        .iter()
        .map(|label| {
            epoch
                .montage()
                .index_of(label)
                .ok_or_else(|| SignalError::Config(format!("reference channel {label} not in montage")))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let n_ch = epoch.n_channels();
    let n = epoch.n_samples();
    let means: Vec<f64> = epoch.channels().iter().map(|r| r.iter().sum::<f64>() / n as f64).collect();
    let centred = DMatrix::from_fn(n_ch, n, |c, t| epoch.channel(c)[t] - means[c]);
    let fit_cols: Vec<usize> = (0..n).step_by(config.decimate).collect();
    let fit = centred.select_columns(&fit_cols);
    let n_fit = fit.ncols() as f64;

    let cov = (&fit * fit.transpose()) / n_fit;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..n_ch).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]];
    if !(top > 1e-12) {
        return Ok(IcaOutcome::passthrough(epoch, IcaWarning::Degenerate, 0));
    }
    let k = order
        .iter()
        .take(config.n_components)
        .take_while(|&&i| eig.eigenvalues[i] > top * 1e-10)
        .count();

    // whitening K (k x ch) and its pseudo-inverse (ch x k)
    let mut whiten = DMatrix::zeros(k, n_ch);
    let mut dewhiten = DMatrix::zeros(n_ch, k);
    for (row, &i) in order.iter().take(k).enumerate() {
        let s = eig.eigenvalues[i].sqrt();
        for c in 0..n_ch {
            let v = eig.eigenvectors[(c, i)];
            whiten[(row, c)] = v / s;
            dewhiten[(c, row)] = v * s;
        }
    }
    let z = &whiten * &fit;

    let Some((unmix, iterations)) = fastica(&z, config) else {
        return Ok(IcaOutcome::passthrough(epoch, IcaWarning::NotConverged, config.max_iter));
    };

    let sources = (&unmix * &whiten) * &centred; // k x n
    let mixing = &dewhiten * unmix.transpose(); // ch x k

    let reference: Vec<f64> = (0..n)
        .map(|t| reference_idx.iter().map(|&c| centred[(c, t)]).sum::<f64>() / reference_idx.len() as f64)
        .collect();

    let mut components = Vec::with_capacity(k);
    let mut cleaned = centred.clone();
    for i in 0..k {
        let s: Vec<f64> = sources.row(i).iter().copied().collect();
        let correlation = pearson(&s, &reference);
        let low_power_fraction = low_fraction(&s, epoch.sample_rate(), config.low_cutoff_hz)?;
        let rejected = correlation.abs() > config.correlation_threshold
            && low_power_fraction > config.low_power_fraction;
        if rejected {
            for c in 0..n_ch {
                let a = mixing[(c, i)];
                for t in 0..n {
                    cleaned[(c, t)] -= a * s[t];
                }
            }
        }
        components.push(ComponentScore { correlation, low_power_fraction, rejected });
    }
    let rejected = components.iter().filter(|c| c.rejected).count();
    let out = if rejected == 0 {
        epoch.clone()
    } else {
        epoch.with_samples((0..n_ch).map(|c| (0..n).map(|t| cleaned[(c, t)] + means[c]).collect()).collect())?
    };
    Ok(IcaOutcome { epoch: out, rejected, components, warning: None, iterations })
}

/// Symmetric FastICA on whitened data; returns the orthogonal unmixing matrix.
fn fastica(z: &DMatrix<f64>, config: &ArtifactConfig) -> Option<(DMatrix<f64>, usize)> {
    let k = z.nrows();
    let n = z.ncols() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = DMatrix::from_fn(k, k, |_, _| StandardNormal.sample(&mut rng));
    let mut w = symmetric_decorrelate(&init)?;
    let zt = z.transpose();
    for iter in 1..=config.max_iter {
        let mut g = &w * z;
        let mut g_prime_mean = vec![0.0; k];
        for r in 0..k {
            let mut acc = 0.0;
            for v in g.row_mut(r).iter_mut() {
                let t = v.tanh();
                *v = t;
                acc += 1.0 - t * t;
            }
            g_prime_mean[r] = acc / n;
        }
        let mut next = (&g * &zt) / n;
        for r in 0..k {
            for c in 0..k {
                next[(r, c)] -= g_prime_mean[r] * w[(r, c)];
            }
        }
        let next = symmetric_decorrelate(&next)?;
        let overlap = &next * w.transpose();
        let change = (0..k).map(|i| (overlap[(i, i)].abs() - 1.0).abs()).fold(0.0, f64::max);
        w = next;
        if !w.iter().all(|v| v.is_finite()) {
            return None;
        }
        if change < config.tolerance {
            return Some((w, iter));
        }
    }
    None
}

/// `(W Wᵀ)^{-1/2} W`
fn symmetric_decorrelate(w: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let eig = SymmetricEigen::new(w * w.transpose());
    if eig.eigenvalues.iter().any(|&l| !(l > 1e-15)) {
        return None;
    }
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    Some(&eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose() * w)
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

fn low_fraction(x: &[f64], sample_rate: f64, cutoff: f64) -> Result<f64, SignalError> {
    let psd = welch_psd(x, sample_rate)?;
    let total = psd.total_power();
    if total <= 0.0 {
        return Ok(0.0);
    }
    Ok(integrate(&psd.frequencies, &psd.density, 0.0, cutoff) / total)
}
