//! Probability-scoring classifiers and their persisted form.
//!
//! Every model maps a complete feature vector to `p_late` in `[0, 1]`.
//! Logistic regression and k-NN see standardized inputs; Naive Bayes and the
//! tree models consume raw features.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{GracePolicy, PaymentLabel};
use crate::error::{Error, Result};
use crate::features::{impute, FeatureLayout, FeatureRow, ImputationStats};
use crate::split::SplitSpec;

pub mod forest;
pub mod gbt;
pub mod knn;
pub mod logistic;
pub mod naive_bayes;
mod persist;
pub mod tree;

pub use forest::{ForestConfig, RandomForest};
pub use gbt::{GbtConfig, GradientBoosting};
pub use knn::{Knn, KnnConfig};
pub use logistic::{LogisticConfig, LogisticRegression};
pub use naive_bayes::GaussianNb;
pub use persist::{load_model, load_model_from_str, save_model, SCHEMA_VERSION};
pub use tree::DecisionTree;

/// Logistic function, stable for large `|z|`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::Training("ragged feature matrix".into()));
        }
        Ok(Self {
            n_rows: rows.len(),
            n_cols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + Clone {
        // chunks_exact panics on zero width
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn map_rows(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Matrix {
        Matrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            data: self.rows().flat_map(f).collect(),
        }
    }
}

/// Feature matrix plus late/on-time targets (`true` = late).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub feature_names: Vec<String>,
    pub x: Matrix,
    pub y: Vec<bool>,
}

impl TrainingSet {
    pub fn new(feature_names: Vec<String>, x: Matrix, y: Vec<bool>) -> Result<Self> {
        if x.n_rows() != y.len() {
            return Err(Error::Training("feature and label counts differ".into()));
        }
        if x.n_cols() != feature_names.len() && x.n_rows() > 0 {
            return Err(Error::FeatureCount {
                expected: feature_names.len(),
                got: x.n_cols(),
            });
        }
        Ok(Self {
            feature_names,
            x,
            y,
        })
    }

    /// Builds the set from imputed, labeled rows.
    pub fn from_rows(rows: &[FeatureRow], layout: FeatureLayout) -> Result<Self> {
        let mut x = Vec::with_capacity(rows.len());
        let mut y = Vec::with_capacity(rows.len());
        for row in rows {
            let label = row
                .label
                .ok_or_else(|| Error::Training(format!("row `{}` is censored", row.invoice_id)))?;
            x.push(row.to_vector(layout)?);
            y.push(label.is_late());
        }
        let mut set = Self::new(layout.names(), Matrix::from_rows(x)?, y)?;
        set.x.n_cols = layout.len();
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_late(&self) -> usize {
        self.y.iter().filter(|&&l| l).count()
    }

    fn require_both_classes(&self) -> Result<()> {
        let late = self.n_late();
        if late == 0 || late == self.len() {
            return Err(Error::Training(
                "training set must contain both late and on-time rows".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    NaiveBayes,
    LogisticRegression,
    Knn,
    RandomForest,
    Gbt,
    Ensemble,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::NaiveBayes,
        ModelKind::LogisticRegression,
        ModelKind::Knn,
        ModelKind::RandomForest,
        ModelKind::Gbt,
        ModelKind::Ensemble,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::NaiveBayes => "naive_bayes",
            ModelKind::LogisticRegression => "logistic_regression",
            ModelKind::Knn => "knn",
            ModelKind::RandomForest => "random_forest",
            ModelKind::Gbt => "gbt",
            ModelKind::Ensemble => "ensemble",
        }
    }

    pub fn uses_standardization(self) -> bool {
        matches!(self, ModelKind::LogisticRegression | ModelKind::Knn)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown model kind `{s}`")))
    }
}

/// Hyperparameters for every model kind.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub logistic_regression: LogisticConfig,
    pub knn: KnnConfig,
    pub random_forest: ForestConfig,
    pub gbt: GbtConfig,
}

/// Per-feature mean and population standard deviation from the training rows.
/// Constant features (`sd == 0`) pass through unscaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardization {
    pub fn fit(x: &Matrix) -> Self {
        let n = x.n_rows().max(1) as f64;
        let mut mean = vec![0.0; x.n_cols()];
        for row in x.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; x.n_cols()];
        for row in x.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let sd = var.into_iter().map(|s| (s / n).sqrt()).collect();
        Self { mean, sd }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(v, (m, s))| if *s > 0.0 { (v - m) / s } else { *v })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelParams {
    NaiveBayes(GaussianNb),
    LogisticRegression(LogisticRegression),
    Knn(Knn),
    RandomForest(RandomForest),
    Gbt(GradientBoosting),
    Ensemble {
        random_forest: Box<TrainedModel>,
        gbt: Box<TrainedModel>,
    },
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::NaiveBayes(_) => ModelKind::NaiveBayes,
            ModelParams::LogisticRegression(_) => ModelKind::LogisticRegression,
            ModelParams::Knn(_) => ModelKind::Knn,
            ModelParams::RandomForest(_) => ModelKind::RandomForest,
            ModelParams::Gbt(_) => ModelKind::Gbt,
            ModelParams::Ensemble { .. } => ModelKind::Ensemble,
        }
    }
}

/// How the training rows were produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingMetadata {
    pub window_months: u32,
    pub grace_days: u32,
    pub include_ratios: bool,
    pub split: Option<SplitSpec>,
    pub seed: u64,
    pub n_train: usize,
}

impl TrainingMetadata {
    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout {
            include_ratios: self.include_ratios,
        }
    }

    pub fn grace(&self) -> GracePolicy {
        GracePolicy::new(self.grace_days)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    schema_version: u32,
    kind: ModelKind,
    feature_names: Vec<String>,
    standardization: Option<Standardization>,
    imputation: Option<ImputationStats>,
    params: ModelParams,
    metadata: TrainingMetadata,
}

impl TrainedModel {
    /// Assembles a model from already-fitted parameters.
    pub fn from_parts(
        feature_names: Vec<String>,
        standardization: Option<Standardization>,
        imputation: Option<ImputationStats>,
        params: ModelParams,
        metadata: TrainingMetadata,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind: params.kind(),
            feature_names,
            standardization,
            imputation,
            params,
            metadata,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.standardization.as_ref()
    }

    pub fn imputation(&self) -> Option<&ImputationStats> {
        self.imputation.as_ref()
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn metadata(&self) -> &TrainingMetadata {
        &self.metadata
    }

    /// `p_late` for a complete feature vector in `feature_names` order.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.feature_names.len() {
            return Err(Error::FeatureCount {
                expected: self.feature_names.len(),
                got: x.len(),
            });
        }
        let standardized;
        let input = match &self.standardization {
            Some(s) => {
                standardized = s.apply(x);
                &standardized[..]
            }
            None => x,
        };
        let p = match &self.params {
            ModelParams::NaiveBayes(m) => m.predict_proba(input),
            ModelParams::LogisticRegression(m) => m.predict_proba(input),
            ModelParams::Knn(m) => m.predict_proba(input),
            ModelParams::RandomForest(m) => m.predict_proba(input),
            ModelParams::Gbt(m) => m.predict_proba(input),
            ModelParams::Ensemble { random_forest, gbt } => {
                (random_forest.score(input)? + gbt.score(input)?) / 2.0
            }
        };
        Ok(p.clamp(0.0, 1.0))
    }

    /// Scores a feature row, filling missing statistics from the model's
    /// training means first.
    pub fn score_row(&self, row: &FeatureRow) -> Result<f64> {
        let filled;
        let row = match &self.imputation {
            Some(stats) => {
                filled = impute(row, stats);
                &filled
            }
            None => row,
        };
        self.score(&row.to_vector(self.metadata.layout())?)
    }

    pub fn classify(&self, x: &[f64], threshold: f64) -> Result<PaymentLabel> {
        Ok(classify_probability(self.score(x)?, threshold))
    }
}

/// Late iff `p_late >= threshold`.
pub fn classify_probability(p_late: f64, threshold: f64) -> PaymentLabel {
    PaymentLabel::from_late(p_late >= threshold)
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Fits a model of the given kind.
pub fn train(
    kind: ModelKind,
    config: &ModelConfig,
    data: &TrainingSet,
    imputation: Option<ImputationStats>,
    metadata: TrainingMetadata,
) -> Result<TrainedModel> {
    if data.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    let names = data.feature_names.clone();
    let seed = metadata.seed;
    let (standardization, params) = match kind {
        ModelKind::NaiveBayes => (None, ModelParams::NaiveBayes(GaussianNb::fit(data)?)),
        ModelKind::LogisticRegression | ModelKind::Knn => {
            let stats = Standardization::fit(&data.x);
            let x = data.x.map_rows(|r| stats.apply(r));
            let scaled = TrainingSet::new(names.clone(), x, data.y.clone())?;
            let params = if kind == ModelKind::Knn {
                ModelParams::Knn(Knn::fit(&scaled, &config.knn)?)
            } else {
                let (model, _) = LogisticRegression::fit(&scaled, &config.logistic_regression)?;
                ModelParams::LogisticRegression(model)
            };
            (Some(stats), params)
        }
        ModelKind::RandomForest => (
            None,
            ModelParams::RandomForest(RandomForest::fit(data, &config.random_forest, seed)?),
        ),
        ModelKind::Gbt => (
            None,
            ModelParams::Gbt(GradientBoosting::fit(data, &config.gbt)?),
        ),
        ModelKind::Ensemble => {
            let rf = train(
                ModelKind::RandomForest,
                config,
                data,
                imputation,
                metadata.clone(),
            )?;
            let gbt = train(ModelKind::Gbt, config, data, imputation, metadata.clone())?;
            return Ok(ensemble(rf, gbt));
        }
    };
    Ok(TrainedModel::from_parts(
        names,
        standardization,
        imputation,
        params,
        metadata,
    ))
}

/// Unweighted probability mean of a random forest and a boosted model.
pub fn ensemble(random_forest: TrainedModel, gbt: TrainedModel) -> TrainedModel {
    let names = random_forest.feature_names.clone();
    let imputation = random_forest.imputation;
    let metadata = random_forest.metadata.clone();
    TrainedModel::from_parts(
        names,
        None,
        imputation,
        ModelParams::Ensemble {
            random_forest: Box::new(random_forest),
            gbt: Box::new(gbt),
        },
        metadata,
    )
}
