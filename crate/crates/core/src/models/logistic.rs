//! L2-regularized logistic regression fitted by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{sigmoid, Matrix, TrainingSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub max_iters: usize,
    pub l2: f64,
    /// Stop once the gradient norm falls below this.
    pub tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            max_iters: 2000,
            l2: 1e-4,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitInfo {
    pub iterations: usize,
    pub converged: bool,
    pub final_loss: f64,
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Mean negative log-likelihood plus `l2 / 2 * |w|^2` (intercept unpenalized),
/// and its gradient. `theta` holds the weights followed by the intercept.
pub fn objective(theta: &[f64], x: &Matrix, y: &[bool], l2: f64) -> (f64, Vec<f64>) {
    let p = x.n_cols();
    let (w, b) = (&theta[..p], theta[p]);
    let n = x.n_rows() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; p + 1];
    for (row, &late) in x.rows().zip(y) {
        let z = b + row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
        let target = f64::from(u8::from(late));
        loss += softplus(z) - target * z;
        let err = sigmoid(z) - target;
        for (g, v) in grad.iter_mut().zip(row) {
            *g += err * v;
        }
        grad[p] += err;
    }
    loss /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    for (g, wi) in grad.iter_mut().zip(w) {
        *g += l2 * wi;
    }
    loss += 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
    (loss, grad)
}

impl LogisticRegression {
    /// All-zero parameters: `p_late = 0.5` everywhere.
    pub fn zeros(n_features: usize) -> Self {
        Self {
            weights: vec![0.0; n_features],
            intercept: 0.0,
        }
    }

    /// Fits on already standardized inputs.
    pub fn fit(data: &TrainingSet, cfg: &LogisticConfig) -> Result<(Self, FitInfo)> {
        if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        let p = data.x.n_cols();
        let mut theta = vec![0.0; p + 1];
        let mut info = FitInfo {
            iterations: 0,
            converged: false,
            final_loss: f64::NAN,
        };
        for iter in 0..=cfg.max_iters {
            let (loss, grad) = objective(&theta, &data.x, &data.y, cfg.l2);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged(iter));
            }
            info.final_loss = loss;
            info.iterations = iter;
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm < cfg.tol {
                info.converged = true;
                break;
            }
            if iter == cfg.max_iters {
                break;
            }
            for (t, g) in theta.iter_mut().zip(&grad) {
                *t -= cfg.learning_rate * g;
            }
        }
        let intercept = theta.pop().expect("intercept present");
        Ok((
            Self {
                weights: theta,
                intercept,
            },
            info,
        ))
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let z = self.intercept + x.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>();
        sigmoid(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(rows: Vec<Vec<f64>>, y: Vec<bool>) -> TrainingSet {
        let names = (0..rows[0].len()).map(|i| format!("f{i}")).collect();
        TrainingSet::new(names, Matrix::from_rows(rows).unwrap(), y).unwrap()
    }

    #[test]
    fn zero_init_is_half() {
        let m = LogisticRegression::zeros(3);
        assert_eq!(m.predict_proba(&[1.0, -2.0, 5.0]), 0.5);
    }

    #[test]
    fn all_late_saturates() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64 - 15.0) / 10.0]).collect();
        let d = data(rows.clone(), vec![true; 30]);
        let cfg = LogisticConfig {
            l2: 0.0,
            ..Default::default()
        };
        let (m, _) = LogisticRegression::fit(&d, &cfg).unwrap();
        for r in &rows {
            assert!(m.predict_proba(r) >= 0.99);
        }
    }

    #[test]
    fn learns_direction_and_converges() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 - 20.0) / 10.0]).collect();
        let y: Vec<bool> = (0..40).map(|i| (i * 7) % 40 > 12 + i / 2).collect();
        let d = data(rows, y);
        let cfg = LogisticConfig {
            max_iters: 20_000,
            tol: 1e-8,
            ..Default::default()
        };
        let (m, info) = LogisticRegression::fit(&d, &cfg).unwrap();
        assert!(info.converged, "{info:?}");
        let (_, g) = objective(&[m.weights[0], m.intercept], &d.x, &d.y, cfg.l2);
        assert!(g.iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn huge_learning_rate_diverges() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 1e200]).collect();
        let y = (0..10).map(|i| i % 2 == 0).collect();
        let cfg = LogisticConfig {
            learning_rate: 1e200,
            ..Default::default()
        };
        assert!(matches!(
            LogisticRegression::fit(&data(rows, y), &cfg),
            Err(Error::Diverged(_))
        ));
    }
}
