//! Two-class workload classification: base learners, stacking ensemble,
//! hyperparameter search and the repeated hold-out evaluation.

mod cv;
mod eval;
pub mod forest;
pub mod logistic;
mod stacking;
pub mod svm;

pub use cv::{grid_search, stratified_folds, stratified_split, GridResult, Split};
pub use eval::{evaluate_repeated, ConfusionMatrix, EvalConfig, EvalReport, IterationMetrics, MetricSummary, Metrics};
pub use forest::{ForestModel, ForestParams};
pub use logistic::{LogisticModel, LogisticParams};
pub use stacking::{
    fit_stacking, predict_label, tune_stacking, HyperparameterGrid, StackingModel, StackingParams,
    MODEL_FORMAT_VERSION,
};
pub use svm::{Kernel, SvcModel, SvcParams};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),
    #[error("stratification: {0}")]
    Stratification(String),
    #[error("input: {0}")]
    Input(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("model file: {0}")]
    Model(String),
    #[error("model file version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WorkloadLabel {
    Low,
    High,
}

impl WorkloadLabel {
    /// +1 for the positive class (High), -1 otherwise.
    pub fn sign(self) -> f64 {
        match self {
            WorkloadLabel::Low => -1.0,
            WorkloadLabel::High => 1.0,
        }
    }

    pub fn from_decision(value: f64) -> Self {
        if value > 0.0 {
            WorkloadLabel::High
        } else {
            WorkloadLabel::Low
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            WorkloadLabel::Low => "Low",
            WorkloadLabel::High => "High",
        }
    }
}

impl fmt::Display for WorkloadLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WorkloadLabel {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "low" | "0" => Ok(WorkloadLabel::Low),
            "high" | "1" => Ok(WorkloadLabel::High),
            other => Err(ClassifierError::Input(format!("unknown workload label {other:?}"))),
        }
    }
}

/// Rows of finite features with a workload label each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    rows: Vec<Vec<f64>>,
    labels: Vec<WorkloadLabel>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<WorkloadLabel>) -> Result<Self, ClassifierError> {
        if rows.len() != labels.len() {
            return Err(ClassifierError::Input(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if let Some(first) = rows.first() {
            let d = first.len();
            for (i, r) in rows.iter().enumerate() {
                if r.len() != d {
                    return Err(ClassifierError::Input(format!("row {i} has {} features, expected {d}", r.len())));
                }
                if r.iter().any(|v| !v.is_finite()) {
                    return Err(ClassifierError::Input(format!("row {i} has a non-finite feature")));
                }
            }
        }
        Ok(Self { rows, labels })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[WorkloadLabel] {
        &self.labels
    }

    pub fn signs(&self) -> Vec<f64> {
        self.labels.iter().map(|l| l.sign()).collect()
    }

    /// (Low count, High count)
    pub fn class_counts(&self) -> (usize, usize) {
        let high = self.labels.iter().filter(|&&l| l == WorkloadLabel::High).count();
        (self.labels.len() - high, high)
    }

    pub fn require_both_classes(&self) -> Result<(), ClassifierError> {
        let (low, high) = self.class_counts();
        if low == 0 || high == 0 {
            return Err(ClassifierError::DegenerateLabels(format!(
                "need both classes, got {low} Low and {high} High"
            )));
        }
        Ok(())
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn with_labels(&self, labels: Vec<WorkloadLabel>) -> Result<Dataset, ClassifierError> {
        Dataset::new(self.rows.clone(), labels)
    }

    /// Keeps only the listed feature columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Dataset {
        Dataset {
            rows: self.rows.iter().map(|r| columns.iter().map(|&c| r[c]).collect()).collect(),
            labels: self.labels.clone(),
        }
    }
}

/// Per-feature z-scoring fitted on training rows. Constant features get
/// unit scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        let scale = var.into_iter().map(|v| if v > 1e-24 { v.sqrt() } else { 1.0 }).collect();
        Self { mean, scale }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }

    pub fn transform_all(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform(r)).collect()
    }
}

/// A fitted two-class model with a real-valued decision (positive = High).
pub trait Decision {
    fn decision(&self, x: &[f64]) -> f64;

    fn predict(&self, x: &[f64]) -> WorkloadLabel {
        WorkloadLabel::from_decision(self.decision(x))
    }
}

/// Hyperparameters that know how to fit their learner on standardized rows.
pub trait Learner: Clone + fmt::Debug {
    type Model: Decision;

    /// `y` holds ±1 targets (High = +1).
    fn fit(&self, x: &[Vec<f64>], y: &[f64], seed: u64) -> Result<Self::Model, ClassifierError>;
}
