//! Random forest of Gini trees grown on bootstrap resamples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::tree::{grow_tree, DecisionTree, GrowParams, Presorted, Target};
use super::TrainingSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per split; `None` means `ceil(sqrt(p))`.
    pub mtry: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 300,
            max_depth: 16,
            min_leaf: 5,
            mtry: None,
        }
    }
}

/// Leaves store the late-class fraction of their bootstrap sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
}

/// RNG for tree `index`: one ChaCha stream per tree under the master seed, so
/// fitting order does not matter.
pub(crate) fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

impl RandomForest {
    pub fn from_trees(trees: Vec<DecisionTree>) -> Self {
        Self { trees }
    }

    pub fn fit(data: &TrainingSet, cfg: &ForestConfig, seed: u64) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Training("empty training set".into()));
        }
        if cfg.n_trees == 0 {
            return Err(Error::Config("n_trees must be positive".into()));
        }
        let p = data.x.n_cols();
        let mtry = cfg
            .mtry
            .unwrap_or_else(|| (p as f64).sqrt().ceil() as usize)
            .clamp(1, p.max(1));
        let params = GrowParams {
            max_depth: cfg.max_depth,
            min_leaf: cfg.min_leaf.max(1) as f64,
            mtry: Some(mtry),
        };
        let presorted = Presorted::new(&data.x);
        let target = Target::Classes(&data.y);
        let n = data.len();
        let trees = (0..cfg.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = tree_rng(seed, t);
                let mut weights = vec![0u32; n];
                for _ in 0..n {
                    weights[rng.random_range(0..n)] += 1;
                }
                grow_tree(&presorted, &weights, &target, params, &mut rng)
            })
            .collect();
        Ok(Self { trees })
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Matrix;

    fn separable() -> TrainingSet {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![(i % 7) as f64, i as f64, ((i * 13) % 5) as f64])
            .collect();
        let y = (0..60).map(|i| i >= 30).collect();
        TrainingSet::new(
            vec!["a".into(), "b".into(), "c".into()],
            Matrix::from_rows(rows).unwrap(),
            y,
        )
        .unwrap()
    }

    #[test]
    fn single_tree_fits_pure_split() {
        let data = separable();
        let cfg = ForestConfig {
            n_trees: 1,
            min_leaf: 1,
            mtry: Some(3),
            ..Default::default()
        };
        let rf = RandomForest::fit(&data, &cfg, 3).unwrap();
        let correct = data
            .x
            .rows()
            .zip(&data.y)
            .filter(|(r, &y)| (rf.predict_proba(r) >= 0.5) == y)
            .count();
        // bootstrap may miss rows near the boundary; every row it saw is separated
        assert!(correct as f64 / data.len() as f64 > 0.95);
        let cfg = ForestConfig {
            n_trees: 50,
            min_leaf: 1,
            ..Default::default()
        };
        let rf = RandomForest::fit(&data, &cfg, 3).unwrap();
        assert!(data
            .x
            .rows()
            .zip(&data.y)
            .all(|(r, &y)| (rf.predict_proba(r) >= 0.5) == y));
    }

    #[test]
    fn averages_tree_outputs() {
        let stump = DecisionTree::stump(0, 0.5, 0.2, 0.8);
        let rf =
            RandomForest::from_trees(vec![stump.clone(), DecisionTree::stump(0, 0.5, 0.4, 1.0)]);
        assert!((rf.predict_proba(&[0.0]) - 0.3).abs() < 1e-15);
        let twin = RandomForest::from_trees(vec![stump.clone(), stump]);
        assert_eq!(twin.predict_proba(&[1.0]), 0.8);
    }

    #[test]
    fn same_seed_same_forest() {
        let data = separable();
        let cfg = ForestConfig {
            n_trees: 10,
            ..Default::default()
        };
        let a = serde_json::to_string(&RandomForest::fit(&data, &cfg, 9).unwrap()).unwrap();
        let b = serde_json::to_string(&RandomForest::fit(&data, &cfg, 9).unwrap()).unwrap();
        assert_eq!(a, b);
        let c = serde_json::to_string(&RandomForest::fit(&data, &cfg, 10).unwrap()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn depth_bounded() {
        let data = separable();
        let cfg = ForestConfig {
            n_trees: 5,
            max_depth: 2,
            min_leaf: 1,
            ..Default::default()
        };
        let rf = RandomForest::fit(&data, &cfg, 1).unwrap();
        assert!(rf.trees.iter().all(|t| t.depth() <= 2));
    }
}
