//! Random forest of CART trees (Gini impurity, bootstrap rows, random
//! feature subsets of size `sqrt(d)` per split).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClassifierError, Decision, Learner};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure.
    pub max_depth: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Leaf { p_high: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn p_high(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { p_high } => return p_high,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
}

impl ForestModel {
    pub fn p_high(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.p_high(x)).sum::<f64>() / self.trees.len() as f64
    }
}

impl Decision for ForestModel {
    /// `2 p(High) - 1`, in [-1, 1].
    fn decision(&self, x: &[f64]) -> f64 {
        2.0 * self.p_high(x) - 1.0
    }
}

impl Learner for ForestParams {
    type Model = ForestModel;

    fn fit(&self, x: &[Vec<f64>], y: &[f64], seed: u64) -> Result<ForestModel, ClassifierError> {
        if self.n_trees == 0 {
            return Err(ClassifierError::Config("forest needs at least one tree".into()));
        }
        if x.is_empty() || x.len() != y.len() {
            return Err(ClassifierError::Input("forest needs matching non-empty rows and targets".into()));
        }
        let d = x[0].len();
        let mtry = ((d as f64).sqrt().round() as usize).clamp(1, d.max(1));
        let high: Vec<bool> = y.iter().map(|&v| v > 0.0).collect();
        let trees = (0..self.n_trees)
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let rows: Vec<usize> = (0..x.len()).map(|_| rng.random_range(0..x.len())).collect();
                let mut builder = TreeBuilder { x, high: &high, mtry, max_depth: self.max_depth, rng, nodes: Vec::new() };
                builder.grow(rows, 0);
                Tree { nodes: builder.nodes }
            })
            .collect();
        Ok(ForestModel { trees })
    }
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    high: &'a [bool],
    mtry: usize,
    max_depth: Option<usize>,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let n_high = rows.iter().filter(|&&r| self.high[r]).count();
        let p_high = n_high as f64 / rows.len() as f64;
        self.nodes.push(Node::Leaf { p_high });
        let pure = n_high == 0 || n_high == rows.len();
        if pure || rows.len() < 2 || self.max_depth.is_some_and(|m| depth >= m) {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&rows) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| self.x[i][feature] <= threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }

    /// Lowest weighted Gini over a random feature subset; `None` when no
    /// candidate feature varies.
    fn best_split(&mut self, rows: &[usize]) -> Option<(usize, f64)> {
        let d = self.x[0].len();
        let mut features: Vec<usize> = (0..d).collect();
        features.shuffle(&mut self.rng);
        let n = rows.len() as f64;
        let total_high = rows.iter().filter(|&&r| self.high[r]).count() as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted: Vec<(f64, bool)> = Vec::with_capacity(rows.len());
        let mut tried = 0;
        for &f in &features {
            sorted.clear();
            sorted.extend(rows.iter().map(|&r| (self.x[r][f], self.high[r])));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            if sorted[0].0 == sorted[sorted.len() - 1].0 {
                continue;
            }
            tried += 1;
            let mut left_n = 0.0;
            let mut left_high = 0.0;
            for k in 0..sorted.len() - 1 {
                left_n += 1.0;
                if sorted[k].1 {
                    left_high += 1.0;
                }
                if sorted[k].0 == sorted[k + 1].0 {
                    continue;
                }
                let right_n = n - left_n;
                let right_high = total_high - left_high;
                let gini = |cnt: f64, hi: f64| {
                    let p = hi / cnt;
                    2.0 * p * (1.0 - p)
                };
                let score = (left_n * gini(left_n, left_high) + right_n * gini(right_n, right_high)) / n;
                if best.is_none_or(|(s, _, _)| score < s) {
                    best = Some((score, f, 0.5 * (sorted[k].0 + sorted[k + 1].0)));
                }
            }
            if tried >= self.mtry {
                break;
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_tree_fits_threshold_exactly() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| if i >= 12 { 1.0 } else { -1.0 }).collect();
        let m = ForestParams { n_trees: 25, max_depth: None }.fit(&x, &y, 3).unwrap();
        assert!(m.decision(&[19.0]) > 0.5);
        assert!(m.decision(&[0.0]) < -0.5);
    }

    #[test]
    fn depth_limit_is_respected() {
        let x: Vec<Vec<f64>> = (0..32).map(|i| vec![i as f64, (i % 4) as f64]).collect();
        let y: Vec<f64> = (0..32).map(|i| if (i / 2) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let m = ForestParams { n_trees: 5, max_depth: Some(1) }.fit(&x, &y, 1).unwrap();
        for t in &m.trees {
            assert!(t.nodes.len() <= 3);
        }
    }

    #[test]
    fn identical_rows_give_neutral_leaf() {
        let x = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let m = ForestParams { n_trees: 10, max_depth: None }.fit(&x, &[1.0, -1.0], 0).unwrap();
        let d = m.decision(&[1.0, 1.0]);
        assert!((-1.0..=1.0).contains(&d));
    }

    #[test]
    fn seeded_fit_is_deterministic() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![(i * 7 % 13) as f64, (i * 5 % 11) as f64]).collect();
        let y: Vec<f64> = (0..30).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let p = ForestParams { n_trees: 10, max_depth: Some(4) };
        assert_eq!(p.fit(&x, &y, 9).unwrap(), p.fit(&x, &y, 9).unwrap());
    }
}
