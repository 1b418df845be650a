//! Brute-force k-nearest-neighbours on standardized features.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Matrix, TrainingSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnConfig {
    pub k: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: 15 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub points: Matrix,
    pub labels: Vec<bool>,
}

impl Knn {
    pub fn fit(data: &TrainingSet, cfg: &KnnConfig) -> Result<Self> {
        if cfg.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if cfg.k > data.len() {
            return Err(Error::Training(format!(
                "k = {} exceeds the {} training rows",
                cfg.k,
                data.len()
            )));
        }
        Ok(Self {
            k: cfg.k,
            points: data.x.clone(),
            labels: data.y.clone(),
        })
    }

    /// Late fraction among the `k` nearest training rows by Euclidean
    /// distance; equal distances resolve to the lower training index.
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let mut dist: Vec<(f64, usize)> = self
            .points
            .rows()
            .enumerate()
            .map(|(i, p)| (p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| -> Ordering {
            a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
        };
        let k = self.k.min(dist.len());
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, cmp);
        }
        let late = dist[..k].iter().filter(|(_, i)| self.labels[*i]).count();
        late as f64 / k as f64
    }
}
