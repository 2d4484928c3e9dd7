use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ClassifierError, Dataset, Decision, Learner, Standardizer, WorkloadLabel};

/// Train/test row indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn class_indices(data: &Dataset, rng: &mut ChaCha8Rng) -> [Vec<usize>; 2] {
    let mut by_class = [Vec::new(), Vec::new()];
    for (i, l) in data.labels().iter().enumerate() {
        by_class[(*l == WorkloadLabel::High) as usize].push(i);
    }
    for idx in &mut by_class {
        idx.shuffle(rng);
    }
    by_class
}

/// Shuffled stratified k-fold assignment. Every fold holds both classes.
pub fn stratified_folds(data: &Dataset, folds: usize, seed: u64) -> Result<Vec<Split>, ClassifierError> {
    if folds < 2 {
        return Err(ClassifierError::Config(format!("need at least 2 folds, got {folds}")));
    }
    data.require_both_classes()?;
    let (low, high) = data.class_counts();
    if low.min(high) < folds {
        return Err(ClassifierError::Stratification(format!(
            "{folds} folds but the smaller class has {} rows",
            low.min(high)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![Vec::new(); folds];
    let mut next = 0;
    for idx in class_indices(data, &mut rng) {
        for i in idx {
            assignment[next % folds].push(i);
            next += 1;
        }
    }
    Ok((0..folds)
        .map(|k| {
            let mut test = assignment[k].clone();
            test.sort_unstable();
            let mut train: Vec<usize> = assignment
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .flat_map(|(_, v)| v.iter().copied())
                .collect();
            train.sort_unstable();
            Split { train, test }
        })
        .collect())
}

/// Stratified hold-out split with `round(test_fraction * n_class)` test rows
/// per class.
pub fn stratified_split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<Split, ClassifierError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(ClassifierError::Config(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, idx) in class_indices(data, &mut rng).into_iter().enumerate() {
        let n_test = (idx.len() as f64 * test_fraction).round() as usize;
        if n_test == 0 || n_test == idx.len() {
            let label = if class == 1 { WorkloadLabel::High } else { WorkloadLabel::Low };
            return Err(ClassifierError::Stratification(format!(
                "{} {label} rows cannot be split {test_fraction}/{}",
                idx.len(),
                1.0 - test_fraction
            )));
        }
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

#[derive(Clone, Debug)]
pub struct GridResult<P> {
    pub best: P,
    pub best_index: usize,
    /// Mean cross-validated accuracy of each candidate, in grid order.
    pub scores: Vec<f64>,
}

/// Picks the candidate with the highest mean k-fold accuracy; ties go to the
/// earliest candidate. Features are standardized inside each fold.
pub fn grid_search<P: Learner>(
    data: &Dataset,
    candidates: &[P],
    folds: usize,
    seed: u64,
) -> Result<GridResult<P>, ClassifierError> {
    if candidates.is_empty() {
        return Err(ClassifierError::Config("empty hyperparameter grid".into()));
    }
    let splits = stratified_folds(data, folds, seed)?;
    let prepared: Vec<_> = splits
        .iter()
        .map(|s| {
            let train = data.subset(&s.train);
            let scaler = Standardizer::fit(train.rows());
            (scaler.transform_all(train.rows()), train.signs(), scaler, data.subset(&s.test))
        })
        .collect();
    let mut scores = Vec::with_capacity(candidates.len());
    for cand in candidates {
        let mut total = 0.0;
        for (k, (x, y, scaler, test)) in prepared.iter().enumerate() {
            let model = cand.fit(x, y, seed.wrapping_add(k as u64))?;
            let correct = test
                .rows()
                .iter()
                .zip(test.labels())
                .filter(|(r, l)| model.predict(&scaler.transform(r)) == **l)
                .count();
            total += correct as f64 / test.len() as f64;
        }
        scores.push(total / prepared.len() as f64);
    }
    let mut best_index = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best_index] {
            best_index = i;
        }
    }
    Ok(GridResult { best: candidates[best_index].clone(), best_index, scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{LogisticParams, SvcParams};

    fn toy(n_low: usize, n_high: usize) -> Dataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n_low {
            rows.push(vec![-1.0 - i as f64 * 0.01, (i % 3) as f64]);
            labels.push(WorkloadLabel::Low);
        }
        for i in 0..n_high {
            rows.push(vec![1.0 + i as f64 * 0.01, (i % 3) as f64]);
            labels.push(WorkloadLabel::High);
        }
        Dataset::new(rows, labels).unwrap()
    }

    #[test]
    fn folds_partition_rows_and_keep_both_classes() {
        let d = toy(13, 17);
        let folds = stratified_folds(&d, 5, 4).unwrap();
        let mut seen: Vec<usize> = folds.iter().flat_map(|f| f.test.iter().copied()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..30).collect::<Vec<_>>());
        for f in &folds {
            let sub = d.subset(&f.test);
            let (l, h) = sub.class_counts();
            assert!(l >= 2 && h >= 3);
            assert_eq!(f.train.len() + f.test.len(), 30);
        }
    }

    #[test]
    fn too_few_rows_per_class_is_stratification_error() {
        let d = toy(3, 10);
        assert!(matches!(stratified_folds(&d, 5, 0), Err(ClassifierError::Stratification(_))));
    }

    #[test]
    fn split_preserves_proportions() {
        let d = toy(40, 60);
        let s = stratified_split(&d, 0.3, 1).unwrap();
        let (l, h) = d.subset(&s.test).class_counts();
        assert_eq!((l, h), (12, 18));
        assert_eq!(s.train.len(), 70);
    }

    #[test]
    fn single_point_grid_returns_it() {
        let d = toy(10, 10);
        let r = grid_search(&d, &[SvcParams::linear(0.5)], 3, 0).unwrap();
        assert_eq!(r.best, SvcParams::linear(0.5));
        assert_eq!(r.best_index, 0);
    }

    #[test]
    fn empty_grid_is_rejected() {
        let d = toy(10, 10);
        let none: [LogisticParams; 0] = [];
        assert!(grid_search(&d, &none, 3, 0).is_err());
    }
}
