//! Two-layer stacking ensemble. The base layer (SVC, random forest, logistic
//! regression) sees standardized features; the meta SVC sees the base
//! decision values. Meta training rows are out-of-fold base outputs from an
//! internal stratified k-fold, after which the base learners are refitted on
//! the whole training set.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::cv::{grid_search, stratified_folds};
use super::{
    ClassifierError, Dataset, Decision, ForestModel, ForestParams, Learner, LogisticModel, LogisticParams,
    Standardizer, SvcModel, SvcParams, WorkloadLabel,
};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MODEL_FORMAT_NAME: &str = "neuroflight-stacking";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StackingParams {
    pub svc: SvcParams,
    pub forest: ForestParams,
    pub logistic: LogisticParams,
    pub meta: SvcParams,
    pub internal_folds: usize,
}

impl Default for StackingParams {
    fn default() -> Self {
        Self {
            svc: SvcParams::rbf(1.0),
            forest: ForestParams { n_trees: 100, max_depth: None },
            logistic: LogisticParams { c: 1.0 },
            meta: SvcParams::linear(1.0),
            internal_folds: 5,
        }
    }
}

/// Candidate values searched for each layer, in tie-breaking order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperparameterGrid {
    pub svc: Vec<SvcParams>,
    pub forest: Vec<ForestParams>,
    pub logistic: Vec<LogisticParams>,
    pub meta: Vec<SvcParams>,
}

impl Default for HyperparameterGrid {
    fn default() -> Self {
        let svc: Vec<SvcParams> = [0.1, 1.0, 10.0]
            .into_iter()
            .flat_map(|c| [SvcParams::linear(c), SvcParams::rbf(c)])
            .collect();
        let forest = [100, 300]
            .into_iter()
            .flat_map(|n_trees| [None, Some(5)].map(|max_depth| ForestParams { n_trees, max_depth }))
            .collect();
        let logistic = [0.1, 1.0, 10.0].map(|c| LogisticParams { c }).to_vec();
        Self { meta: svc.clone(), svc, forest, logistic }
    }
}

impl HyperparameterGrid {
    /// One point per layer; no search.
    pub fn fixed(params: &StackingParams) -> Self {
        Self {
            svc: vec![params.svc],
            forest: vec![params.forest],
            logistic: vec![params.logistic],
            meta: vec![params.meta],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StackingModel {
    pub params: StackingParams,
    pub seed: u64,
    pub scaler: Standardizer,
    pub svc: SvcModel,
    pub forest: ForestModel,
    pub logistic: LogisticModel,
    pub meta_scaler: Standardizer,
    pub meta: SvcModel,
}

struct BaseModels {
    svc: SvcModel,
    forest: ForestModel,
    logistic: LogisticModel,
}

impl BaseModels {
    fn fit(params: &StackingParams, x: &[Vec<f64>], y: &[f64], seed: u64) -> Result<Self, ClassifierError> {
        Ok(Self {
            svc: params.svc.fit(x, y, seed)?,
            forest: params.forest.fit(x, y, seed)?,
            logistic: params.logistic.fit(x, y, seed)?,
        })
    }

    fn outputs(&self, x: &[f64]) -> Vec<f64> {
        vec![self.svc.decision(x), self.forest.decision(x), self.logistic.decision(x)]
    }
}

/// Out-of-fold base decisions for every (standardized) row. With fewer than
/// two rows in the smaller class, in-sample outputs are used instead.
fn out_of_fold(
    params: &StackingParams,
    x: &[Vec<f64>],
    labels: &[WorkloadLabel],
    seed: u64,
) -> Result<Vec<Vec<f64>>, ClassifierError> {
    let scaled = Dataset::new(x.to_vec(), labels.to_vec())?;
    let y = scaled.signs();
    let (low, high) = scaled.class_counts();
    let folds = params.internal_folds.min(low.min(high));
    if folds < 2 {
        let base = BaseModels::fit(params, x, &y, seed)?;
        return Ok(x.iter().map(|r| base.outputs(r)).collect());
    }
    let mut oof = vec![Vec::new(); x.len()];
    for (k, split) in stratified_folds(&scaled, folds, seed)?.iter().enumerate() {
        let tx: Vec<Vec<f64>> = split.train.iter().map(|&i| x[i].clone()).collect();
        let ty: Vec<f64> = split.train.iter().map(|&i| y[i]).collect();
        let base = BaseModels::fit(params, &tx, &ty, seed.wrapping_add(1 + k as u64))?;
        for &i in &split.test {
            oof[i] = base.outputs(&x[i]);
        }
    }
    Ok(oof)
}

pub fn fit_stacking(data: &Dataset, params: &StackingParams, seed: u64) -> Result<StackingModel, ClassifierError> {
    data.require_both_classes()?;
    let scaler = Standardizer::fit(data.rows());
    let x = scaler.transform_all(data.rows());
    let y = data.signs();
    let oof = out_of_fold(params, &x, data.labels(), seed)?;
    let meta_scaler = Standardizer::fit(&oof);
    let meta = params.meta.fit(&meta_scaler.transform_all(&oof), &y, seed)?;
    let base = BaseModels::fit(params, &x, &y, seed)?;
    Ok(StackingModel {
        params: params.clone(),
        seed,
        scaler,
        svc: base.svc,
        forest: base.forest,
        logistic: base.logistic,
        meta_scaler,
        meta,
    })
}

/// Grid search for each base learner, then for the meta learner on the
/// out-of-fold outputs of the tuned base layer.
pub fn tune_stacking(
    data: &Dataset,
    grid: &HyperparameterGrid,
    folds: usize,
    seed: u64,
) -> Result<StackingParams, ClassifierError> {
    let mut params = StackingParams {
        svc: grid_search(data, &grid.svc, folds, seed)?.best,
        forest: grid_search(data, &grid.forest, folds, seed)?.best,
        logistic: grid_search(data, &grid.logistic, folds, seed)?.best,
        ..StackingParams::default()
    };
    if grid.meta.len() == 1 {
        params.meta = grid.meta[0];
        return Ok(params);
    }
    let scaler = Standardizer::fit(data.rows());
    let oof = out_of_fold(&params, &scaler.transform_all(data.rows()), data.labels(), seed)?;
    let meta_data = Dataset::new(oof, data.labels().to_vec())?;
    params.meta = grid_search(&meta_data, &grid.meta, folds, seed)?.best;
    Ok(params)
}

impl StackingModel {
    pub fn n_features(&self) -> usize {
        self.scaler.mean.len()
    }

    /// Base-layer outputs for a raw feature row.
    pub fn base_outputs(&self, x: &[f64]) -> Vec<f64> {
        self.base_outputs_standardized(&self.scaler.transform(x))
    }

    /// Base-layer outputs for a row already standardized with `self.scaler`.
    pub fn base_outputs_standardized(&self, z: &[f64]) -> Vec<f64> {
        vec![self.svc.decision(z), self.forest.decision(z), self.logistic.decision(z)]
    }

    pub fn decision(&self, x: &[f64]) -> Result<f64, ClassifierError> {
        self.check_input(x)?;
        Ok(self.meta.decision(&self.meta_scaler.transform(&self.base_outputs(x))))
    }

    fn check_input(&self, x: &[f64]) -> Result<(), ClassifierError> {
        if x.len() != self.n_features() {
            return Err(ClassifierError::Input(format!(
                "expected {} features, got {}",
                self.n_features(),
                x.len()
            )));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(ClassifierError::Input(format!("feature {i} is not finite")));
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<(), ClassifierError> {
        let file = ModelFileRef { format: MODEL_FORMAT_NAME, version: MODEL_FORMAT_VERSION, model: self };
        serde_json::to_writer(w, &file).map_err(|e| ClassifierError::Model(e.to_string()))
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self, ClassifierError> {
        let value: serde_json::Value =
            serde_json::from_reader(r).map_err(|e| ClassifierError::Model(e.to_string()))?;
        if value.get("format").and_then(|v| v.as_str()) != Some(MODEL_FORMAT_NAME) {
            return Err(ClassifierError::Model("not a stacking model file".into()));
        }
        let version = value
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| ClassifierError::Model("missing version".into()))? as u32;
        if version != MODEL_FORMAT_VERSION {
            return Err(ClassifierError::Version { found: version, expected: MODEL_FORMAT_VERSION });
        }
        let file: ModelFile = serde_json::from_value(value).map_err(|e| ClassifierError::Model(e.to_string()))?;
        Ok(file.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ClassifierError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ClassifierError> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

#[derive(Serialize)]
struct ModelFileRef<'a> {
    format: &'a str,
    version: u32,
    model: &'a StackingModel,
}

#[derive(Deserialize)]
struct ModelFile {
    model: StackingModel,
}

pub fn predict_label(model: &StackingModel, x: &[f64]) -> Result<WorkloadLabel, ClassifierError> {
    model.decision(x).map(WorkloadLabel::from_decision)
}
