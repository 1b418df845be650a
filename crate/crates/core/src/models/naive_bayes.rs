//! Gaussian Naive Bayes.

use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::TrainingSet;

/// Variance floor relative to the largest feature variance.
pub const VAR_SMOOTHING: f64 = 1e-9;

/// Class-conditional Gaussians; index 0 is on-time, 1 is late.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub log_prior: [f64; 2],
    pub mean: [Vec<f64>; 2],
    pub var: [Vec<f64>; 2],
}

fn moments<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, p: usize) -> (Vec<f64>, Vec<f64>) {
    let mut n = 0usize;
    let mut mean = vec![0.0; p];
    for r in rows.clone() {
        n += 1;
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; p];
    for r in rows {
        for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    var.iter_mut().for_each(|s| *s /= n as f64);
    (mean, var)
}

impl GaussianNb {
    pub fn fit(data: &TrainingSet) -> Result<Self> {
        data.require_both_classes()?;
        let p = data.x.n_cols();
        let (_, all_var) = moments(data.x.rows(), p);
        let mut floor = VAR_SMOOTHING * all_var.iter().copied().fold(0.0, f64::max);
        if floor <= 0.0 {
            floor = VAR_SMOOTHING;
        }

        let class_rows = |late: bool| {
            data.x
                .rows()
                .zip(&data.y)
                .filter(move |(_, &y)| y == late)
                .map(|(r, _)| r)
        };
        let (m0, v0) = moments(class_rows(false), p);
        let (m1, v1) = moments(class_rows(true), p);
        let n = data.len() as f64;
        let n_late = data.n_late() as f64;
        let floored = |v: Vec<f64>| v.into_iter().map(|s| s.max(floor)).collect::<Vec<_>>();
        Ok(Self {
            log_prior: [((n - n_late) / n).ln(), (n_late / n).ln()],
            mean: [m0, m1],
            var: [floored(v0), floored(v1)],
        })
    }

    fn joint_log_likelihood(&self, class: usize, x: &[f64]) -> f64 {
        let mut ll = self.log_prior[class];
        for ((v, m), s) in x.iter().zip(&self.mean[class]).zip(&self.var[class]) {
            ll -= 0.5 * (2.0 * std::f64::consts::PI * s).ln() + (v - m) * (v - m) / (2.0 * s);
        }
        ll
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let diff = self.joint_log_likelihood(0, x) - self.joint_log_likelihood(1, x);
        // p_late = 1 / (1 + exp(ll_ontime - ll_late))
        super::sigmoid(-diff)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Matrix;

    fn set(rows: Vec<Vec<f64>>, y: Vec<bool>) -> TrainingSet {
        let names = (0..rows[0].len()).map(|i| format!("f{i}")).collect();
        TrainingSet::new(names, Matrix::from_rows(rows).unwrap(), y).unwrap()
    }

    #[test]
    fn identical_classes_give_prior() {
        let base = [vec![1.0, 4.0], vec![2.0, -1.0], vec![3.5, 0.0]];
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for r in &base {
            rows.push(r.clone());
            y.push(false);
            for _ in 0..3 {
                rows.push(r.clone());
                y.push(true);
            }
        }
        let nb = GaussianNb::fit(&set(rows, y)).unwrap();
        for q in [[0.0, 0.0], [10.0, -3.0], [2.0, 1.0]] {
            assert!((nb.predict_proba(&q) - 0.75).abs() < 1e-9);
        }
    }

    #[test]
    fn separating_feature() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                vec![if i < 10 {
                    i as f64 * 0.1
                } else {
                    10.0 + i as f64 * 0.1
                }]
            })
            .collect();
        let y = (0..20).map(|i| i >= 10).collect();
        let nb = GaussianNb::fit(&set(rows, y)).unwrap();
        assert!(nb.predict_proba(&[11.0]) > 0.999);
        assert!(nb.predict_proba(&[0.5]) < 0.001);
    }

    #[test]
    fn zero_variance_feature() {
        let rows = vec![
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![1.0, 2.0],
            vec![1.0, 3.0],
        ];
        let nb = GaussianNb::fit(&set(rows, vec![false, false, true, true])).unwrap();
        let p = nb.predict_proba(&[1.0, 2.5]);
        assert!(p.is_finite() && p > 0.5);
        let all_const = vec![vec![1.0], vec![1.0], vec![1.0]];
        let nb = GaussianNb::fit(&set(all_const, vec![false, true, true])).unwrap();
        assert!((nb.predict_proba(&[1.0]) - 2.0 / 3.0).abs() < 1e-12);
        assert!(nb.predict_proba(&[5.0]).is_finite());
    }

    #[test]
    fn single_class_rejected() {
        assert!(GaussianNb::fit(&set(vec![vec![1.0], vec![2.0]], vec![true, true])).is_err());
    }
}
