//! Binary decision trees shared by the random forest and gradient boosting.
//!
//! Growth works on per-feature row orders sorted once up front; every split
//! stably partitions each order, so no node ever re-sorts. Candidate
//! thresholds are midpoints between consecutive distinct values and a row
//! goes left when `x[feature] <= threshold`.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::Matrix;

/// Minimum improvement a split must bring.
const MIN_GAIN: f64 = 1e-12;
/// Newton leaf denominators are floored here.
pub(crate) const MIN_HESSIAN: f64 = 1e-12;

/// Flat node arrays; node 0 is the root. `feature[i] == None` marks a leaf whose
/// output is `value[i]`; for split nodes `value[i]` is the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    feature: Vec<Option<u32>>,
    value: Vec<f64>,
    left: Vec<u32>,
    right: Vec<u32>,
}

impl DecisionTree {
    /// A single-leaf tree.
    pub fn leaf(value: f64) -> Self {
        Self {
            feature: vec![None],
            value: vec![value],
            left: vec![0],
            right: vec![0],
        }
    }

    /// A depth-one tree: `left_value` when `x[feature] <= threshold`.
    pub fn stump(feature: usize, threshold: f64, left_value: f64, right_value: f64) -> Self {
        Self {
            feature: vec![Some(feature as u32), None, None],
            value: vec![threshold, left_value, right_value],
            left: vec![1, 0, 0],
            right: vec![2, 0, 0],
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        while let Some(f) = self.feature[i] {
            i = if x[f as usize] <= self.value[i] {
                self.left[i] as usize
            } else {
                self.right[i] as usize
            };
        }
        self.value[i]
    }

    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.feature.iter().filter(|f| f.is_none()).count()
    }

    /// Number of split levels on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, i: usize) -> usize {
            match t.feature[i] {
                None => 0,
                Some(_) => 1 + go(t, t.left[i] as usize).max(go(t, t.right[i] as usize)),
            }
        }
        go(self, 0)
    }

    /// Structural checks for trees read from disk.
    pub fn validate(&self, n_features: usize) -> Result<()> {
        let n = self.feature.len();
        let bad = |m: String| Err(Error::ModelFormat(m));
        if n == 0 || self.value.len() != n || self.left.len() != n || self.right.len() != n {
            return bad("tree node arrays have inconsistent lengths".into());
        }
        for i in 0..n {
            if !self.value[i].is_finite() {
                return bad(format!("node {i} holds a non-finite value"));
            }
            if let Some(f) = self.feature[i] {
                let (l, r) = (self.left[i] as usize, self.right[i] as usize);
                // children always follow their parent, which rules out cycles
                if l <= i || r <= i || l >= n || r >= n {
                    return bad(format!("node {i} has invalid children"));
                }
                if f as usize >= n_features {
                    return bad(format!("node {i} splits on unknown feature {f}"));
                }
            }
        }
        Ok(())
    }
}

/// Per-feature row orders, ascending by value with row index as tiebreak.
pub(crate) struct Presorted {
    columns: Vec<Vec<f64>>,
    order: Vec<Vec<u32>>,
}

impl Presorted {
    pub(crate) fn new(x: &Matrix) -> Self {
        let columns: Vec<Vec<f64>> = (0..x.n_cols()).map(|j| x.column(j)).collect();
        let order = columns
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..col.len() as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { columns, order }
    }

    pub(crate) fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
}

pub(crate) enum Target<'a> {
    /// Class membership; split by Gini impurity, leaves hold the late fraction.
    Classes(&'a [bool]),
    /// Squared-error splits on the residuals, Newton-step leaves.
    Newton {
        residual: &'a [f64],
        hessian: &'a [f64],
    },
}

impl Target<'_> {
    fn response(&self, row: usize) -> f64 {
        match self {
            Target::Classes(late) => f64::from(u8::from(late[row])),
            Target::Newton { residual, .. } => residual[row],
        }
    }

    /// Larger is better; split gain is `score(left) + score(right) - score(parent)`.
    fn score(&self, weight: f64, sum: f64) -> f64 {
        match self {
            Target::Classes(_) => (sum * sum + (weight - sum) * (weight - sum)) / weight,
            Target::Newton { .. } => sum * sum / weight,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub max_depth: usize,
    /// Minimum total sample weight per leaf.
    pub min_leaf: f64,
    /// Features examined per node; `None` examines all of them.
    pub mtry: Option<usize>,
}

struct Builder<'a, R> {
    data: &'a Presorted,
    weights: &'a [u32],
    target: &'a Target<'a>,
    params: GrowParams,
    rng: &'a mut R,
    goes_left: Vec<bool>,
    tree: DecisionTree,
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl<R: Rng> Builder<'_, R> {
    fn push_node(&mut self) -> usize {
        self.tree.feature.push(None);
        self.tree.value.push(0.0);
        self.tree.left.push(0);
        self.tree.right.push(0);
        self.tree.feature.len() - 1
    }

    fn leaf_value(&self, rows: &[u32], weight: f64, sum: f64) -> f64 {
        match self.target {
            Target::Classes(_) => sum / weight,
            Target::Newton { hessian, .. } => {
                let h: f64 = rows
                    .iter()
                    .map(|&r| f64::from(self.weights[r as usize]) * hessian[r as usize])
                    .sum();
                sum / h.max(MIN_HESSIAN)
            }
        }
    }

    fn best_split(&mut self, orders: &[Vec<u32>], weight: f64, sum: f64) -> Option<Candidate> {
        let n_features = orders.len();
        let features: Vec<usize> = match self.params.mtry {
            Some(m) if m < n_features => index::sample(self.rng, n_features, m).into_vec(),
            _ => (0..n_features).collect(),
        };
        let parent = self.target.score(weight, sum);
        let min_leaf = self.params.min_leaf;
        let mut best: Option<Candidate> = None;
        for f in features {
            let col = &self.data.columns[f];
            let order = &orders[f];
            let (mut wl, mut sl) = (0.0, 0.0);
            for pair in order.windows(2) {
                let row = pair[0] as usize;
                let w = f64::from(self.weights[row]);
                wl += w;
                sl += w * self.target.response(row);
                let (v, next) = (col[row], col[pair[1] as usize]);
                if next <= v || wl < min_leaf || weight - wl < min_leaf {
                    continue;
                }
                let gain =
                    self.target.score(wl, sl) + self.target.score(weight - wl, sum - sl) - parent;
                if gain > MIN_GAIN && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mid = v + (next - v) / 2.0;
                    best = Some(Candidate {
                        gain,
                        feature: f,
                        threshold: if mid < next { mid } else { v },
                    });
                }
            }
        }
        best
    }

    fn build(&mut self, orders: Vec<Vec<u32>>, depth: usize) -> usize {
        let node = self.push_node();
        let rows = &orders[0];
        let (mut weight, mut sum) = (0.0, 0.0);
        for &r in rows {
            let w = f64::from(self.weights[r as usize]);
            weight += w;
            sum += w * self.target.response(r as usize);
        }
        let pure = matches!(self.target, Target::Classes(_)) && (sum == 0.0 || sum == weight);
        let split = if depth >= self.params.max_depth || pure || weight < 2.0 * self.params.min_leaf
        {
            None
        } else {
            self.best_split(&orders, weight, sum)
        };
        let Some(split) = split else {
            self.tree.value[node] = self.leaf_value(rows, weight, sum);
            return node;
        };

        let col = &self.data.columns[split.feature];
        for &r in rows {
            self.goes_left[r as usize] = col[r as usize] <= split.threshold;
        }
        let (left, right): (Vec<Vec<u32>>, Vec<Vec<u32>>) = orders
            .into_iter()
            .map(|order| order.into_iter().partition(|&r| self.goes_left[r as usize]))
            .unzip();
        self.tree.feature[node] = Some(split.feature as u32);
        self.tree.value[node] = split.threshold;
        let l = self.build(left, depth + 1);
        let r = self.build(right, depth + 1);
        self.tree.left[node] = l as u32;
        self.tree.right[node] = r as u32;
        node
    }
}

/// Grows one tree on the rows with non-zero `weights` (bootstrap multiplicities).
pub(crate) fn grow_tree<R: Rng>(
    data: &Presorted,
    weights: &[u32],
    target: &Target<'_>,
    params: GrowParams,
    rng: &mut R,
) -> DecisionTree {
    let orders: Vec<Vec<u32>> = data
        .order
        .iter()
        .map(|o| {
            o.iter()
                .copied()
                .filter(|&r| weights[r as usize] > 0)
                .collect()
        })
        .collect();
    let mut builder = Builder {
        data,
        weights,
        target,
        params,
        rng,
        goes_left: vec![false; data.n_rows()],
        tree: DecisionTree {
            feature: Vec::new(),
            value: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
        },
    };
    if orders.first().is_none_or(Vec::is_empty) {
        return DecisionTree::leaf(0.0);
    }
    builder.build(orders, 0);
    builder.tree
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn matrix(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn separating_feature_is_found() {
        let x = matrix(&[&[5.0, 1.0], &[3.0, 2.0], &[9.0, 3.0], &[7.0, 4.0]]);
        let y = [false, false, true, true];
        let data = Presorted::new(&x);
        let params = GrowParams {
            max_depth: 4,
            min_leaf: 1.0,
            mtry: None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tree = grow_tree(&data, &[1; 4], &Target::Classes(&y), params, &mut rng);
        assert_eq!(tree.depth(), 1);
        assert_eq!(tree.n_leaves(), 2);
        // column 1 separates as well with equal gain; column 0 comes first
        assert_eq!(tree.feature[0], Some(0));
        assert_eq!(tree.value[0], 6.0);
        for (i, row) in x.rows().enumerate() {
            assert_eq!(tree.predict(row), f64::from(u8::from(y[i])));
        }
        tree.validate(2).unwrap();
    }

    #[test]
    fn respects_depth_and_min_leaf() {
        let rows: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64]).collect();
        let y: Vec<bool> = (0..64).map(|i| i % 2 == 0).collect();
        let x = Matrix::from_rows(rows).unwrap();
        let data = Presorted::new(&x);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = GrowParams {
            max_depth: 3,
            min_leaf: 1.0,
            mtry: None,
        };
        let tree = grow_tree(&data, &[1; 64], &Target::Classes(&y), params, &mut rng);
        assert!(tree.depth() <= 3);
        let params = GrowParams {
            max_depth: 30,
            min_leaf: 20.0,
            mtry: None,
        };
        let tree = grow_tree(&data, &[1; 64], &Target::Classes(&y), params, &mut rng);
        assert!(tree.n_leaves() <= 3);
    }

    #[test]
    fn newton_leaves() {
        let x = matrix(&[&[0.0], &[0.0], &[1.0], &[1.0]]);
        let residual = [0.5, 0.5, -0.5, -0.5];
        let hessian = [0.25; 4];
        let data = Presorted::new(&x);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let target = Target::Newton {
            residual: &residual,
            hessian: &hessian,
        };
        let params = GrowParams {
            max_depth: 2,
            min_leaf: 1.0,
            mtry: None,
        };
        let tree = grow_tree(&data, &[1; 4], &target, params, &mut rng);
        assert_eq!(tree.predict(&[0.0]), 2.0);
        assert_eq!(tree.predict(&[1.0]), -2.0);
    }

    #[test]
    fn bootstrap_weights_count_as_samples() {
        let x = matrix(&[&[0.0], &[1.0], &[2.0]]);
        let y = [false, true, true];
        let data = Presorted::new(&x);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = GrowParams {
            max_depth: 0,
            min_leaf: 1.0,
            mtry: None,
        };
        let tree = grow_tree(&data, &[3, 1, 0], &Target::Classes(&y), params, &mut rng);
        assert_eq!(tree.predict(&[0.0]), 0.25);
    }

    #[test]
    fn validate_rejects_cycles() {
        let mut t = DecisionTree::stump(0, 0.5, 0.0, 1.0);
        t.left[0] = 0;
        assert!(t.validate(1).is_err());
        assert!(DecisionTree::stump(3, 0.5, 0.0, 1.0).validate(2).is_err());
    }
}
