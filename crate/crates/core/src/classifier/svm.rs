//! C-support-vector classifier trained by SMO with second-order working-set
//! selection. Kernel rows are precomputed; datasets here are a few hundred
//! rows at most.

use serde::{Deserialize, Serialize};

use super::{ClassifierError, Decision, Learner};

const TAU: f64 = 1e-12;
const STOP_EPS: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    /// `gamma: None` uses `1 / n_features`, the usual choice for standardized input.
    Rbf { gamma: Option<f64> },
}

impl Kernel {
    fn eval(&self, gamma: f64, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { .. } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvcParams {
    pub c: f64,
    pub kernel: Kernel,
}

impl SvcParams {
    pub fn linear(c: f64) -> Self {
        Self { c, kernel: Kernel::Linear }
    }

    pub fn rbf(c: f64) -> Self {
        Self { c, kernel: Kernel::Rbf { gamma: None } }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvcModel {
    pub kernel: Kernel,
    pub gamma: f64,
    /// Support vectors with their `alpha_i * y_i` coefficients.
    pub support: Vec<Vec<f64>>,
    pub coef: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
}

impl SvcModel {
    /// Primal weights of a linear machine; `None` for non-linear kernels.
    pub fn linear_weights(&self) -> Option<Vec<f64>> {
        if self.kernel != Kernel::Linear {
            return None;
        }
        let d = self.support.first().map_or(0, Vec::len);
        let mut w = vec![0.0; d];
        for (sv, c) in self.support.iter().zip(&self.coef) {
            for (wi, x) in w.iter_mut().zip(sv) {
                *wi += c * x;
            }
        }
        Some(w)
    }
}

impl Decision for SvcModel {
    fn decision(&self, x: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(sv, c)| c * self.kernel.eval(self.gamma, sv, x))
            .sum::<f64>()
            - self.rho
    }
}

impl Learner for SvcParams {
    type Model = SvcModel;

    fn fit(&self, x: &[Vec<f64>], y: &[f64], _seed: u64) -> Result<SvcModel, ClassifierError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(ClassifierError::Config(format!("SVC C must be positive, got {}", self.c)));
        }
        if x.is_empty() || x.len() != y.len() {
            return Err(ClassifierError::Input("SVC needs matching non-empty rows and targets".into()));
        }
        let d = x[0].len();
        let gamma = match self.kernel {
            Kernel::Linear => 0.0,
            Kernel::Rbf { gamma } => gamma.unwrap_or(1.0 / d.max(1) as f64),
        };
        let n = x.len();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = self.kernel.eval(gamma, &x[i], &x[j]);
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        let (alpha, rho, iterations) = smo(&k, y, self.c);
        let mut support = Vec::new();
        let mut coef = Vec::new();
        for i in 0..n {
            if alpha[i] > 0.0 {
                support.push(x[i].clone());
                coef.push(alpha[i] * y[i]);
            }
        }
        Ok(SvcModel { kernel: self.kernel, gamma, support, coef, rho, iterations })
    }
}

/// Dual solver. Returns (alpha, rho, iterations).
fn smo(k: &[f64], y: &[f64], c: f64) -> (Vec<f64>, f64, usize) {
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * k[i * n + j];
    let qd: Vec<f64> = (0..n).map(|i| k[i * n + i]).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    let max_iter = (100 * n).max(100_000);

    let mut iter = 0;
    while iter < max_iter {
        // working set selection (second order)
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            if y[t] > 0.0 {
                if !upper(alpha[t]) && -grad[t] >= gmax {
                    gmax = -grad[t];
                    i_sel = Some(t);
                }
            } else if !lower(alpha[t]) && grad[t] >= gmax {
                gmax = grad[t];
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else { break };
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut obj_min = f64::INFINITY;
        for t in 0..n {
            if y[t] > 0.0 {
                if !lower(alpha[t]) {
                    let grad_diff = gmax + grad[t];
                    gmax2 = gmax2.max(grad[t]);
                    if grad_diff > 0.0 {
                        let quad = qd[i] + qd[t] - 2.0 * y[i] * q(i, t);
                        let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                        if obj <= obj_min {
                            obj_min = obj;
                            j_sel = Some(t);
                        }
                    }
                }
            } else if !upper(alpha[t]) {
                let grad_diff = gmax - grad[t];
                gmax2 = gmax2.max(-grad[t]);
                if grad_diff > 0.0 {
                    let quad = qd[i] + qd[t] + 2.0 * y[i] * q(i, t);
                    let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= obj_min {
                        obj_min = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        let Some(j) = j_sel else { break };
        if gmax + gmax2 < STOP_EPS {
            break;
        }
        iter += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = q(i, j);
        if y[i] != y[j] {
            let quad = (qd[i] + qd[j] + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (qd[i] + qd[j] - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(i, t) * di + q(j, t) * dj;
        }
    }

    let (mut ub, mut lb, mut sum_free, mut n_free) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        let r = (ub + lb) / 2.0;
        if r.is_finite() { r } else { 0.0 }
    };
    (alpha, rho, iter)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_two_points_with_max_margin() {
        let x = vec![vec![-1.0, 0.0], vec![1.0, 0.0]];
        let y = vec![-1.0, 1.0];
        let m = SvcParams::linear(10.0).fit(&x, &y, 0).unwrap();
        let w = m.linear_weights().unwrap();
        // hard-margin solution w = (1, 0), b = 0
        assert!((w[0] - 1.0).abs() < 1e-6 && w[1].abs() < 1e-9, "{w:?}");
        assert!(m.rho.abs() < 1e-6);
        assert!((m.decision(&[1.0, 5.0]) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rbf_solves_xor() {
        let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let y = vec![-1.0, -1.0, 1.0, 1.0];
        let m = SvcParams { c: 100.0, kernel: Kernel::Rbf { gamma: Some(2.0) } }.fit(&x, &y, 0).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(m.decision(xi).signum(), *yi);
        }
    }

    #[test]
    fn kkt_conditions_hold_on_noisy_problem() {
        // deterministic pseudo-random overlapping clusters
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..60 {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            let a = ((i * 37 % 101) as f64 / 101.0 - 0.5) * 3.0;
            let b = ((i * 53 % 97) as f64 / 97.0 - 0.5) * 3.0;
            x.push(vec![s * 0.8 + a, b]);
            y.push(s);
        }
        let c = 1.0;
        let m = SvcParams::linear(c).fit(&x, &y, 0).unwrap();
        let mut dual_sum = 0.0;
        for (xi, yi) in x.iter().zip(&y) {
            let margin = yi * m.decision(xi);
            let alpha = m
                .support
                .iter()
                .zip(&m.coef)
                .find(|(sv, _)| *sv == xi)
                .map_or(0.0, |(_, c)| c * yi);
            dual_sum += alpha * yi;
            if alpha <= 1e-9 {
                assert!(margin >= 1.0 - 2e-3, "non-support point inside margin: {margin}");
            } else if alpha >= c - 1e-9 {
                assert!(margin <= 1.0 + 2e-3);
            } else {
                assert!((margin - 1.0).abs() < 2e-3, "free SV off margin: {margin}");
            }
        }
        assert!(dual_sum.abs() < 1e-9);
    }

    #[test]
    fn duplicate_rows_with_opposite_labels() {
        let x = vec![vec![0.3, 0.3], vec![0.3, 0.3]];
        let m = SvcParams::rbf(1.0).fit(&x, &[1.0, -1.0], 0).unwrap();
        assert_eq!(m.decision(&[0.3, 0.3]), 0.0);
    }
}
