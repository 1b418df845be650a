//! JSON model files.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{ModelKind, ModelParams, TrainedModel};

pub const SCHEMA_VERSION: u32 = 1;

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(model)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_model_from_str(&text)
}

pub fn load_model_from_str(text: &str) -> Result<TrainedModel> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
    let found = value
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::ModelFormat("missing integer `schema_version`".into()))?;
    if found != u64::from(SCHEMA_VERSION) {
        return Err(Error::SchemaVersion {
            found,
            expected: SCHEMA_VERSION,
        });
    }
    let model: TrainedModel =
        serde_json::from_value(value).map_err(|e| Error::ModelFormat(e.to_string()))?;
    check(&model)?;
    Ok(model)
}

fn bad(msg: impl Into<String>) -> Error {
    Error::ModelFormat(msg.into())
}

fn check(model: &TrainedModel) -> Result<()> {
    let p = model.feature_names.len();
    if model.schema_version != SCHEMA_VERSION {
        return Err(bad("nested model has a different schema_version"));
    }
    if model.params.kind() != model.kind {
        return Err(bad(format!(
            "kind `{}` does not match `{}` parameters",
            model.kind,
            model.params.kind()
        )));
    }
    if model.metadata.layout().len() != p {
        return Err(bad(
            "feature_names do not match the recorded feature layout",
        ));
    }
    match &model.standardization {
        Some(s) if s.mean.len() != p || s.sd.len() != p => {
            return Err(bad("standardization length differs from feature count"))
        }
        Some(s) if s.sd.iter().any(|&v| !(v >= 0.0 && v.is_finite())) => {
            return Err(bad("negative or non-finite standard deviation"))
        }
        None if model.kind.uses_standardization() => {
            return Err(bad(format!("`{}` requires standardization", model.kind)))
        }
        Some(_) if !model.kind.uses_standardization() => {
            return Err(bad(format!("`{}` takes raw features", model.kind)))
        }
        _ => {}
    }
    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
    match &model.params {
        ModelParams::NaiveBayes(nb) => {
            let ok = (0..2).all(|c| {
                nb.mean[c].len() == p
                    && nb.var[c].len() == p
                    && finite(&nb.mean[c])
                    && nb.var[c].iter().all(|&v| v > 0.0 && v.is_finite())
            });
            if !ok || !nb.log_prior.iter().all(|v| v.is_finite()) {
                return Err(bad("malformed naive bayes parameters"));
            }
        }
        ModelParams::LogisticRegression(lr) => {
            if lr.weights.len() != p || !finite(&lr.weights) || !lr.intercept.is_finite() {
                return Err(bad("malformed logistic regression parameters"));
            }
        }
        ModelParams::Knn(knn) => {
            let n = knn.points.n_rows();
            if knn.points.n_cols() != p
                || knn.points.data.len() != n * p
                || knn.labels.len() != n
                || knn.k == 0
                || knn.k > n
            {
                return Err(bad("malformed k-NN parameters"));
            }
        }
        ModelParams::RandomForest(rf) => {
            if rf.trees.is_empty() {
                return Err(bad("random forest without trees"));
            }
            for t in &rf.trees {
                t.validate(p)?;
            }
        }
        ModelParams::Gbt(gbt) => {
            if !gbt.initial_score.is_finite() || !gbt.shrinkage.is_finite() {
                return Err(bad("malformed boosting parameters"));
            }
            for t in &gbt.trees {
                t.validate(p)?;
            }
        }
        ModelParams::Ensemble { random_forest, gbt } => {
            if random_forest.kind != ModelKind::RandomForest || gbt.kind != ModelKind::Gbt {
                return Err(bad(
                    "ensemble members must be a random forest and a gbt model",
                ));
            }
            if random_forest.feature_names != model.feature_names
                || gbt.feature_names != model.feature_names
            {
                return Err(bad("ensemble members disagree on feature names"));
            }
            check(random_forest)?;
            check(gbt)?;
        }
    }
    Ok(())
}
