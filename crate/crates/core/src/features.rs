//! The 128-slot trial feature vector, the 10-feature model input, and the
//! recursive feature elimination used to rank features.
//!
//! Canonical layout is channel-major: for each montage channel in order, the
//! slots are theta, alpha, beta, engagement.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{ClassifierError, Dataset, Learner, Standardizer, SvcParams, WorkloadLabel};
use crate::signal::{Band, BandPowerTable, ChannelMontage, EngagementTable, CHANNEL_COUNT};

pub const FEATURES_PER_CHANNEL: usize = 4;
pub const FEATURE_COUNT: usize = CHANNEL_COUNT * FEATURES_PER_CHANNEL;
pub const MODEL_FEATURE_COUNT: usize = 10;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("shape: {0}")]
    Shape(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("feature file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Theta,
    Alpha,
    Beta,
    Engagement,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 4] =
        [FeatureKind::Theta, FeatureKind::Alpha, FeatureKind::Beta, FeatureKind::Engagement];

    fn slot(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Theta => "theta",
            FeatureKind::Alpha => "alpha",
            FeatureKind::Beta => "beta",
            FeatureKind::Engagement => "engagement",
        }
    }

    fn display_name(self) -> &'static str {
        match self {
            FeatureKind::Theta => "Theta",
            FeatureKind::Alpha => "Alpha",
            FeatureKind::Beta => "Beta",
            FeatureKind::Engagement => "EEG Engagement",
        }
    }
}

impl From<Band> for FeatureKind {
    fn from(b: Band) -> Self {
        match b {
            Band::Theta => FeatureKind::Theta,
            Band::Alpha => FeatureKind::Alpha,
            Band::Beta => FeatureKind::Beta,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureKey {
    pub kind: FeatureKind,
    pub channel: String,
}

impl FeatureKey {
    pub fn new(kind: FeatureKind, channel: impl Into<String>) -> Self {
        Self { kind, channel: channel.into() }
    }

    /// Column name used in feature files, e.g. `beta_P8`.
    pub fn column_name(&self) -> String {
        format!("{}_{}", self.kind.name(), self.channel)
    }

    /// Slot of this key in a vector laid out for `montage`.
    pub fn slot(&self, montage: &ChannelMontage) -> Option<usize> {
        montage.index_of(&self.channel).map(|c| c * FEATURES_PER_CHANNEL + self.kind.slot())
    }
}

impl fmt::Display for FeatureKey {
    /// Human-readable name, e.g. `Beta P8`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.kind.display_name(), self.channel)
    }
}

impl FromStr for FeatureKey {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, channel) = s
            .split_once('_')
            .ok_or_else(|| FeatureError::Config(format!("feature column {s:?} is not kind_channel")))?;
        let kind = FeatureKind::ALL
            .into_iter()
            .find(|k| k.name() == kind)
            .ok_or_else(|| FeatureError::Config(format!("unknown feature kind {kind:?}")))?;
        Ok(Self::new(kind, channel))
    }
}

/// The model's input features, most important first.
pub const MODEL_FEATURES: [(FeatureKind, &str); MODEL_FEATURE_COUNT] = [
    (FeatureKind::Beta, "P8"),
    (FeatureKind::Alpha, "P8"),
    (FeatureKind::Theta, "Oz"),
    (FeatureKind::Engagement, "T8"),
    (FeatureKind::Beta, "F8"),
    (FeatureKind::Theta, "T7"),
    (FeatureKind::Engagement, "P8"),
    (FeatureKind::Theta, "CP6"),
    (FeatureKind::Beta, "FP2"),
    (FeatureKind::Theta, "FP1"),
];

pub fn model_feature_keys() -> Vec<FeatureKey> {
    MODEL_FEATURES.iter().map(|(k, c)| FeatureKey::new(*k, *c)).collect()
}

/// All 128 keys of `montage` in canonical order.
pub fn canonical_keys(montage: &ChannelMontage) -> Vec<FeatureKey> {
    montage
        .labels()
        .iter()
        .flat_map(|ch| FeatureKind::ALL.into_iter().map(move |k| FeatureKey::new(k, ch.clone())))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector128 {
    montage: ChannelMontage,
    values: Vec<f64>,
}

impl FeatureVector128 {
    pub fn new(montage: ChannelMontage, values: Vec<f64>) -> Result<Self, FeatureError> {
        if values.len() != FEATURE_COUNT || montage.len() * FEATURES_PER_CHANNEL != FEATURE_COUNT {
            return Err(FeatureError::Shape(format!("expected {FEATURE_COUNT} values, got {}", values.len())));
        }
        Ok(Self { montage, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn montage(&self) -> &ChannelMontage {
        &self.montage
    }

    pub fn keys(&self) -> Vec<FeatureKey> {
        canonical_keys(&self.montage)
    }

    pub fn get(&self, key: &FeatureKey) -> Option<f64> {
        key.slot(&self.montage).map(|i| self.values[i])
    }
}

/// The ten model inputs in ranked order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFeatureVector10(pub [f64; MODEL_FEATURE_COUNT]);

impl ModelFeatureVector10 {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn assemble_features(
    bands: &BandPowerTable,
    engagement: &EngagementTable,
    montage: &ChannelMontage,
) -> Result<FeatureVector128, FeatureError> {
    if bands.n_channels() != montage.len() || engagement.values().len() != montage.len() {
        return Err(FeatureError::Shape(format!(
            "tables have {} / {} channels, montage has {}",
            bands.n_channels(),
            engagement.values().len(),
            montage.len()
        )));
    }
    let mut values = Vec::with_capacity(FEATURE_COUNT);
    for (row, eng) in bands.rows().iter().zip(engagement.values()) {
        values.extend_from_slice(row);
        values.push(*eng);
    }
    FeatureVector128::new(montage.clone(), values)
}

pub fn select_model_features(v: &FeatureVector128) -> Result<ModelFeatureVector10, FeatureError> {
    let mut out = [0.0; MODEL_FEATURE_COUNT];
    for (slot, (kind, channel)) in out.iter_mut().zip(MODEL_FEATURES) {
        *slot = v
            .get(&FeatureKey::new(kind, channel))
            .ok_or_else(|| FeatureError::Config(format!("montage lacks model channel {channel}")))?;
    }
    Ok(ModelFeatureVector10(out))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfeConfig {
    /// Ranking estimator: a linear SVC on standardized features.
    pub estimator: SvcParams,
    pub seed: u64,
}

impl Default for RfeConfig {
    fn default() -> Self {
        Self { estimator: SvcParams::linear(1.0), seed: 0 }
    }
}

/// Recursive feature elimination, one feature per round, by smallest
/// |weight| of a linear SVC. Ties eliminate the feature that comes later in
/// the input order.
///
/// Returns the `keep` survivors as column indices, ranked by |weight| in the
/// final fit, largest first.
pub fn rfe_rank(data: &Dataset, keep: usize, config: &RfeConfig) -> Result<Vec<usize>, FeatureError> {
    let d = data.n_features();
    if keep == 0 || keep > d {
        return Err(FeatureError::Config(format!("keep must be in 1..={d}, got {keep}")));
    }
    data.require_both_classes()?;
    let y = data.signs();
    let mut active: Vec<usize> = (0..d).collect();
    loop {
        let sub = data.select_columns(&active);
        let scaler = Standardizer::fit(sub.rows());
        let model = config.estimator.fit(&scaler.transform_all(sub.rows()), &y, config.seed)?;
        let w = model
            .linear_weights()
            .ok_or_else(|| FeatureError::Config("RFE estimator must use a linear kernel".into()))?;
        let importance: Vec<f64> = w.iter().map(|v| v.abs()).collect();
        if active.len() == keep {
            let mut order: Vec<usize> = (0..active.len()).collect();
            order.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));
            return Ok(order.into_iter().map(|i| active[i]).collect());
        }
        let mut worst = 0;
        for i in 1..active.len() {
            if importance[i] <= importance[worst] {
                worst = i;
            }
        }
        active.remove(worst);
    }
}

/// Writes a feature file: header of column names then `label`, one trial per row.
pub fn write_feature_csv<W: Write>(
    mut w: W,
    keys: &[FeatureKey],
    rows: &[(Vec<f64>, WorkloadLabel)],
) -> Result<(), FeatureError> {
    let header: Vec<String> = keys.iter().map(FeatureKey::column_name).collect();
    writeln!(w, "{},label", header.join(","))?;
    for (values, label) in rows {
        if values.len() != keys.len() {
            return Err(FeatureError::Shape(format!("row has {} values for {} keys", values.len(), keys.len())));
        }
        let cells: Vec<String> = values.iter().map(|v| format!("{v:e}")).collect();
        writeln!(w, "{},{label}", cells.join(","))?;
    }
    Ok(())
}

pub fn read_feature_csv<R: BufRead>(r: R) -> Result<(Vec<FeatureKey>, Dataset), FeatureError> {
    let mut lines = r.lines().enumerate();
    let (_, header) = lines.next().ok_or(FeatureError::Parse { line: 1, message: "empty file".into() })?;
    let header = header?;
    let mut cols: Vec<&str> = header.trim_end().split(',').collect();
    if cols.pop() != Some("label") {
        return Err(FeatureError::Parse { line: 1, message: "last column must be `label`".into() });
    }
    let keys = cols.iter().map(|c| c.parse()).collect::<Result<Vec<FeatureKey>, _>>()?;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| FeatureError::Parse { line: i + 1, message };
        let cells: Vec<&str> = line.trim_end().split(',').collect();
        if cells.len() != keys.len() + 1 {
            return Err(bad(format!("{} cells, expected {}", cells.len(), keys.len() + 1)));
        }
        let values = cells[..keys.len()]
            .iter()
            .map(|c| c.trim().parse::<f64>().map_err(|e| bad(format!("{c:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        labels.push(cells[keys.len()].parse().map_err(|e: ClassifierError| bad(e.to_string()))?);
        rows.push(values);
    }
    Ok((keys, Dataset::new(rows, labels)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tables(band: f64, eng: f64) -> (BandPowerTable, EngagementTable) {
        (
            BandPowerTable::new(vec![[band; 3]; CHANNEL_COUNT]).unwrap(),
            EngagementTable::new(vec![eng; CHANNEL_COUNT]).unwrap(),
        )
    }

    #[test]
    fn uniform_tables_fill_canonical_slots() {
        let m = ChannelMontage::standard();
        let (b, e) = tables(1.0, 0.5);
        let v = assemble_features(&b, &e, &m).unwrap();
        assert_eq!(v.values().len(), 128);
        assert_eq!(v.values().iter().filter(|&&x| x == 1.0).count(), 96);
        for (i, x) in v.values().iter().enumerate() {
            assert_eq!(*x, if i % 4 == 3 { 0.5 } else { 1.0 });
        }
    }

    #[test]
    fn perturbing_one_cell_moves_one_slot() {
        let m = ChannelMontage::standard();
        let (_, e) = tables(1.0, 0.5);
        let mut rows = vec![[1.0; 3]; CHANNEL_COUNT];
        let p8 = m.index_of("P8").unwrap();
        rows[p8][Band::Beta.index()] += 1.0;
        let base = assemble_features(&tables(1.0, 0.5).0, &e, &m).unwrap();
        let bumped = assemble_features(&BandPowerTable::new(rows).unwrap(), &e, &m).unwrap();
        let diff: Vec<usize> =
            (0..128).filter(|&i| base.values()[i] != bumped.values()[i]).collect();
        let slot = FeatureKey::new(FeatureKind::Beta, "P8").slot(&m).unwrap();
        assert_eq!(diff, vec![slot]);
        assert_eq!(base.keys()[slot].column_name(), "beta_P8");
    }

    #[test]
    fn dimension_mismatch_is_shape_error() {
        let m = ChannelMontage::standard();
        let b = BandPowerTable::new(vec![[1.0; 3]; 31]).unwrap();
        let e = EngagementTable::new(vec![0.5; 32]).unwrap();
        assert!(matches!(assemble_features(&b, &e, &m), Err(FeatureError::Shape(_))));
    }

    #[test]
    fn model_features_follow_ranked_order() {
        let m = ChannelMontage::standard();
        let mut values = vec![0.0; 128];
        values[FeatureKey::new(FeatureKind::Beta, "P8").slot(&m).unwrap()] = 7.0;
        let out = select_model_features(&FeatureVector128::new(m.clone(), values).unwrap()).unwrap();
        assert_eq!(out.0, [7.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);

        let mut values = vec![0.0; 128];
        values[FeatureKey::new(FeatureKind::Theta, "FP1").slot(&m).unwrap()] = 3.0;
        let out = select_model_features(&FeatureVector128::new(m.clone(), values).unwrap()).unwrap();
        assert_eq!(out.0[9], 3.0);
        assert_eq!(out.0[..9], [0.0; 9]);

        let zero = select_model_features(&FeatureVector128::new(m, vec![0.0; 128]).unwrap()).unwrap();
        assert_eq!(zero.0, [0.0; 10]);
    }

    #[test]
    fn model_feature_names_match_published_list() {
        let names: Vec<String> = model_feature_keys().iter().map(ToString::to_string).collect();
        assert_eq!(
            names,
            [
                "Beta P8", "Alpha P8", "Theta Oz", "EEG Engagement T8", "Beta F8", "Theta T7",
                "EEG Engagement P8", "Theta CP6", "Beta FP2", "Theta FP1"
            ]
        );
    }

    #[test]
    fn feature_csv_round_trip() {
        let keys = model_feature_keys();
        let rows = vec![
            ((0..10).map(|i| i as f64 * 1.5e-3).collect(), WorkloadLabel::High),
            ((0..10).map(|i| -(i as f64) * 2.0).collect(), WorkloadLabel::Low),
        ];
        let mut buf = Vec::new();
        write_feature_csv(&mut buf, &keys, &rows).unwrap();
        let (k2, d) = read_feature_csv(buf.as_slice()).unwrap();
        assert_eq!(k2, keys);
        assert_eq!(d.rows()[0], rows[0].0);
        assert_eq!(d.labels(), &[WorkloadLabel::High, WorkloadLabel::Low]);
    }

    #[test]
    fn bad_feature_csv_reports_line() {
        let text = "beta_P8,label\n1.0,High\nnope,Low\n";
        match read_feature_csv(text.as_bytes()) {
            Err(FeatureError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
