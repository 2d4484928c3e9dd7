//! L2-regularised logistic regression, fitted by damped Newton steps.
//! Objective: `½‖w‖² + C Σ log(1 + exp(-yᵢ(w·xᵢ + b)))`; the intercept is
//! not penalised.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ClassifierError, Decision, Learner};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl Decision for LogisticModel {
    fn decision(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.intercept
    }
}

fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Learner for LogisticParams {
    type Model = LogisticModel;

    fn fit(&self, x: &[Vec<f64>], y: &[f64], _seed: u64) -> Result<LogisticModel, ClassifierError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(ClassifierError::Config(format!("logistic C must be positive, got {}", self.c)));
        }
        if x.is_empty() || x.len() != y.len() {
            return Err(ClassifierError::Input("logistic regression needs matching rows and targets".into()));
        }
        let d = x[0].len();
        let p = d + 1; // last coordinate is the intercept
        let c = self.c;
        let margin = |theta: &DVector<f64>, xi: &[f64]| -> f64 {
            xi.iter().enumerate().map(|(j, v)| theta[j] * v).sum::<f64>() + theta[d]
        };
        let objective = |theta: &DVector<f64>| -> f64 {
            let reg: f64 = (0..d).map(|j| theta[j] * theta[j]).sum::<f64>() * 0.5;
            reg + c * x.iter().zip(y).map(|(xi, yi)| log1p_exp(-yi * margin(theta, xi))).sum::<f64>()
        };

        let mut theta = DVector::zeros(p);
        let mut f = objective(&theta);
        for _ in 0..100 {
            let mut grad = DVector::zeros(p);
            let mut hess = DMatrix::zeros(p, p);
            for j in 0..d {
                grad[j] = theta[j];
                hess[(j, j)] = 1.0;
            }
            hess[(d, d)] = 1e-10;
            for (xi, &yi) in x.iter().zip(y) {
                let m = margin(&theta, xi);
                let s = sigmoid(-yi * m);
                let w = c * s * (1.0 - s);
                for a in 0..p {
                    let xa = if a == d { 1.0 } else { xi[a] };
                    grad[a] -= c * yi * s * xa;
                    for b in a..p {
                        let xb = if b == d { 1.0 } else { xi[b] };
                        hess[(a, b)] += w * xa * xb;
                    }
                }
            }
            for a in 0..p {
                for b in 0..a {
                    hess[(a, b)] = hess[(b, a)];
                }
            }
            if grad.norm() < 1e-8 * (1.0 + f.abs()) {
                break;
            }
            let step = match hess.clone().cholesky() {
                Some(ch) => ch.solve(&grad),
                None => grad.clone(),
            };
            let slope = grad.dot(&step);
            let mut t = 1.0;
            let mut accepted = false;
            while t > 1e-10 {
                let candidate = &theta - &step * t;
                let fc = objective(&candidate);
                if fc <= f - 1e-4 * t * slope {
                    theta = candidate;
                    f = fc;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Ok(LogisticModel { weights: theta.iter().take(d).copied().collect(), intercept: theta[d] })
    }
}
