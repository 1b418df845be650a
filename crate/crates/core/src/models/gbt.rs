//! Gradient boosted trees for binary logistic loss.
//!
//! Starts from the training log-odds; each round fits a squared-error
//! regression tree to the residuals `y - p` and sets each leaf to the Newton
//! step `sum(residual) / sum(p * (1 - p))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::tree::{grow_tree, DecisionTree, GrowParams, Presorted, Target};
use super::{sigmoid, TrainingSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub shrinkage: f64,
    pub min_leaf: usize,
}

impl Default for GbtConfig {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: 3,
            shrinkage: 0.1,
            min_leaf: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    pub initial_score: f64,
    pub shrinkage: f64,
    pub trees: Vec<DecisionTree>,
}

/// Mean binary log-loss given raw scores.
pub fn log_loss(scores: &[f64], y: &[bool]) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(y)
        .map(|(&f, &late)| {
            // ln(1 + e^-f) for late, ln(1 + e^f) for on time
            let z = if late { -f } else { f };
            z.max(0.0) + (-z.abs()).exp().ln_1p()
        })
        .sum();
    total / scores.len() as f64
}

impl GradientBoosting {
    pub fn fit(data: &TrainingSet, cfg: &GbtConfig) -> Result<Self> {
        Self::fit_with_history(data, cfg).map(|(m, _)| m)
    }

    /// Also returns the training log-loss before the first round and after each one.
    pub fn fit_with_history(data: &TrainingSet, cfg: &GbtConfig) -> Result<(Self, Vec<f64>)> {
        if !(cfg.shrinkage.is_finite() && cfg.shrinkage >= 0.0) {
            return Err(Error::Config("shrinkage must be non-negative".into()));
        }
        let n_late = data.n_late();
        let n_on_time = data.len() - n_late;
        if n_late == 0 || n_on_time == 0 {
            return Err(Error::Training(
                "boosting needs both classes to set the initial log-odds".into(),
            ));
        }
        let initial_score = (n_late as f64 / n_on_time as f64).ln();
        let mut scores = vec![initial_score; data.len()];
        let mut history = vec![log_loss(&scores, &data.y)];
        let mut trees = Vec::with_capacity(cfg.n_trees);

        let presorted = Presorted::new(&data.x);
        let weights = vec![1u32; data.len()];
        let params = GrowParams {
            max_depth: cfg.max_depth,
            min_leaf: cfg.min_leaf.max(1) as f64,
            mtry: None,
        };
        // all features are examined, so the rng is never drawn from
        let mut rng = super::forest::tree_rng(0, 0);
        let mut residual = vec![0.0; data.len()];
        let mut hessian = vec![0.0; data.len()];
        for _ in 0..cfg.n_trees {
            for i in 0..data.len() {
                let p = sigmoid(scores[i]);
                residual[i] = f64::from(u8::from(data.y[i])) - p;
                hessian[i] = p * (1.0 - p);
            }
            let target = Target::Newton {
                residual: &residual,
                hessian: &hessian,
            };
            let tree = grow_tree(&presorted, &weights, &target, params, &mut rng);
            for (score, row) in scores.iter_mut().zip(data.x.rows()) {
                *score += cfg.shrinkage * tree.predict(row);
            }
            history.push(log_loss(&scores, &data.y));
            trees.push(tree);
        }
        Ok((
            Self {
                initial_score,
                shrinkage: cfg.shrinkage,
                trees,
            },
            history,
        ))
    }

    pub fn raw_score(&self, x: &[f64]) -> f64 {
        self.initial_score + self.shrinkage * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.raw_score(x))
    }
}
