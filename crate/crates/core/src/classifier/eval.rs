use serde::{Deserialize, Serialize};

use super::stacking::{fit_stacking, tune_stacking, HyperparameterGrid, StackingParams};
use super::{stratified_split, ClassifierError, Dataset, WorkloadLabel};

/// Counts with High as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn from_pairs(truth: &[WorkloadLabel], predicted: &[WorkloadLabel]) -> Self {
        let mut m = Self::default();
        for (t, p) in truth.iter().zip(predicted) {
            match (t, p) {
                (WorkloadLabel::High, WorkloadLabel::High) => m.tp += 1,
                (WorkloadLabel::Low, WorkloadLabel::Low) => m.tn += 1,
                (WorkloadLabel::Low, WorkloadLabel::High) => m.fp += 1,
                (WorkloadLabel::High, WorkloadLabel::Low) => m.fn_ += 1,
            }
        }
        m
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Undefined ratios (no predicted or no actual positives) are reported as 0.
    pub fn metrics(&self) -> Metrics {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Metrics { accuracy: ratio(self.tp + self.tn, self.total()), f1, precision, recall }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

impl Metrics {
    fn fields(&self) -> [f64; 4] {
        [self.accuracy, self.f1, self.precision, self.recall]
    }

    fn from_fields(v: [f64; 4]) -> Self {
        Self { accuracy: v[0], f1: v[1], precision: v[2], recall: v[3] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub iteration: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    pub params: StackingParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: Metrics,
    /// Sample standard deviation across iterations (0 for a single iteration).
    pub sd: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub iterations: usize,
    pub test_fraction: f64,
    pub per_iteration: Vec<IterationMetrics>,
    pub summary: MetricSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub iterations: usize,
    pub test_fraction: f64,
    pub folds: usize,
    pub grid: HyperparameterGrid,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { iterations: 10, test_fraction: 0.30, folds: 5, grid: HyperparameterGrid::default(), seed: 0 }
    }
}

/// Repeated stratified hold-out: each iteration draws a fresh split, tunes
/// and fits on the training part and scores the test part.
pub fn evaluate_repeated(data: &Dataset, config: &EvalConfig) -> Result<EvalReport, ClassifierError> {
    if config.iterations == 0 {
        return Err(ClassifierError::Config("need at least one iteration".into()));
    }
    data.require_both_classes()?;
    let mut per_iteration = Vec::with_capacity(config.iterations);
    for it in 0..config.iterations {
        let seed = config.seed.wrapping_add(it as u64 * 7919);
        let split = stratified_split(data, config.test_fraction, seed)?;
        let train = data.subset(&split.train);
        let test = data.subset(&split.test);
        let params = tune_stacking(&train, &config.grid, config.folds, seed)?;
        let model = fit_stacking(&train, &params, seed)?;
        let predicted = test
            .rows()
            .iter()
            .map(|r| model.decision(r).map(WorkloadLabel::from_decision))
            .collect::<Result<Vec<_>, _>>()?;
        let confusion = ConfusionMatrix::from_pairs(test.labels(), &predicted);
        per_iteration.push(IterationMetrics { iteration: it + 1, confusion, metrics: confusion.metrics(), params });
    }
    let n = per_iteration.len() as f64;
    let mut mean = [0.0; 4];
    for m in &per_iteration {
        for (acc, v) in mean.iter_mut().zip(m.metrics.fields()) {
            *acc += v / n;
        }
    }
    let mut sd = [0.0; 4];
    if per_iteration.len() > 1 {
        for m in &per_iteration {
            for ((acc, v), mu) in sd.iter_mut().zip(m.metrics.fields()).zip(mean) {
                *acc += (v - mu).powi(2) / (n - 1.0);
            }
        }
        sd.iter_mut().for_each(|v| *v = v.sqrt());
    }
    Ok(EvalReport {
        iterations: config.iterations,
        test_fraction: config.test_fraction,
        per_iteration,
        summary: MetricSummary { mean: Metrics::from_fields(mean), sd: Metrics::from_fields(sd) },
    })
}
