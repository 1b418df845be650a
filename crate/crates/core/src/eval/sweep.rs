use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::GracePolicy;
use crate::error::Result;
use crate::features::{
    featurize, fit_imputation, impute, FeatureLayout, FeatureRow, ImputationStats,
};
use crate::ingest::InvoiceDataset;
use crate::models::{
    ensemble, train, ModelConfig, ModelKind, TrainedModel, TrainingMetadata, TrainingSet,
};
use crate::split::{split, Partitions, Snapshot, SplitSpec};

use super::metrics::{evaluate, MetricsReport, RocCurve};

/// Settings shared by every run in an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub grace: GracePolicy,
    pub layout: FeatureLayout,
    pub models: ModelConfig,
    pub seed: u64,
}

impl Default for Experiment {
    fn default() -> Self {
        Self {
            grace: GracePolicy::default(),
            layout: FeatureLayout::default(),
            models: ModelConfig::default(),
            seed: 42,
        }
    }
}

/// Imputed partitions ready for training.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub window_months: u32,
    pub spec: SplitSpec,
    pub imputation: ImputationStats,
    /// Partitions before imputation, as split.
    pub raw: Partitions,
    pub parts: Partitions,
}

/// Splits featurized rows and fills missing statistics with train-partition means.
pub fn prepare_rows(rows: &[FeatureRow], window_months: u32, spec: &SplitSpec) -> Result<Prepared> {
    let raw = split(rows, spec)?;
    let imputation = fit_imputation(&raw.train)?;
    let fill = |rs: &[FeatureRow]| {
        rs.iter()
            .map(|r| impute(r, &imputation))
            .collect::<Vec<_>>()
    };
    let parts = Partitions {
        train: fill(&raw.train),
        validation: fill(&raw.validation),
        test: fill(&raw.test),
    };
    Ok(Prepared {
        window_months,
        spec: *spec,
        imputation,
        raw,
        parts,
    })
}

pub fn prepare(
    ds: &InvoiceDataset,
    window_months: u32,
    spec: &SplitSpec,
    exp: &Experiment,
) -> Result<Prepared> {
    prepare_rows(
        &featurize(ds, window_months, exp.grace),
        window_months,
        spec,
    )
}

impl Prepared {
    pub fn training_set(&self, layout: FeatureLayout) -> Result<TrainingSet> {
        TrainingSet::from_rows(&self.parts.train, layout)
    }

    pub fn metadata(&self, exp: &Experiment) -> TrainingMetadata {
        TrainingMetadata {
            window_months: self.window_months,
            grace_days: exp.grace.grace_days,
            include_ratios: exp.layout.include_ratios,
            split: Some(self.spec),
            seed: exp.seed,
            n_train: self.parts.train.len(),
        }
    }

    pub fn fit(&self, kind: ModelKind, exp: &Experiment) -> Result<TrainedModel> {
        self.fit_on(kind, exp, &self.training_set(exp.layout)?)
    }

    fn fit_on(
        &self,
        kind: ModelKind,
        exp: &Experiment,
        data: &TrainingSet,
    ) -> Result<TrainedModel> {
        train(
            kind,
            &exp.models,
            data,
            Some(self.imputation),
            self.metadata(exp),
        )
    }

    /// Fits every requested kind, reusing the forest and boosted model inside
    /// the ensemble when those kinds are requested too.
    pub fn fit_all(
        &self,
        kinds: &[ModelKind],
        exp: &Experiment,
    ) -> Result<BTreeMap<ModelKind, TrainedModel>> {
        let data = self.training_set(exp.layout)?;
        let mut out = BTreeMap::new();
        let with_ensemble = kinds.contains(&ModelKind::Ensemble);
        let need = |k: ModelKind| {
            kinds.contains(&k)
                || (with_ensemble && matches!(k, ModelKind::RandomForest | ModelKind::Gbt))
        };
        for kind in ModelKind::ALL {
            if kind != ModelKind::Ensemble && need(kind) {
                out.insert(kind, self.fit_on(kind, exp, &data)?);
            }
        }
        if with_ensemble {
            let e = ensemble(
                out[&ModelKind::RandomForest].clone(),
                out[&ModelKind::Gbt].clone(),
            );
            out.insert(ModelKind::Ensemble, e);
        }
        out.retain(|k, _| kinds.contains(k));
        Ok(out)
    }
}

/// Test-partition result of one model.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub model: TrainedModel,
    pub report: MetricsReport,
    pub roc: Option<RocCurve>,
}

pub fn run_single(prepared: &Prepared, kind: ModelKind, exp: &Experiment) -> Result<RunOutcome> {
    let model = prepared.fit(kind, exp)?;
    let (report, roc) = evaluate(&model, &prepared.parts.test)?;
    Ok(RunOutcome { model, report, roc })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub window_months: u32,
    pub model: ModelKind,
    pub accuracy: f64,
    pub f1: f64,
    pub auc: Option<f64>,
}

/// Test accuracy for every (window, model) pair; features, imputation and
/// standardization are refitted per window.
pub fn window_sweep(
    ds: &InvoiceDataset,
    windows: &[u32],
    kinds: &[ModelKind],
    spec: &SplitSpec,
    exp: &Experiment,
) -> Result<Vec<SweepCell>> {
    let mut cells = Vec::with_capacity(windows.len() * kinds.len());
    for &w in windows {
        let prepared = prepare(ds, w, spec, exp)?;
        let models = prepared.fit_all(kinds, exp)?;
        for &kind in kinds {
            let (report, _) = evaluate(&models[&kind], &prepared.parts.test)?;
            cells.push(SweepCell {
                window_months: w,
                model: kind,
                accuracy: report.accuracy,
                f1: report.f1_late,
                auc: report.auc,
            });
        }
    }
    Ok(cells)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn write_sweep_csv<W: Write>(writer: W, cells: &[SweepCell]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["window_months", "model", "accuracy", "f1", "auc"])?;
    for c in cells {
        w.write_record([
            c.window_months.to_string(),
            c.model.to_string(),
            c.accuracy.to_string(),
            c.f1.to_string(),
            opt(c.auc),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotReport {
    pub snapshot: Snapshot,
    pub report: MetricsReport,
}

/// Runs the full pipeline once per split; features are extracted once since
/// they do not depend on the split.
pub fn snapshot_sweep(
    ds: &InvoiceDataset,
    specs: &[SplitSpec],
    window_months: u32,
    kind: ModelKind,
    exp: &Experiment,
) -> Result<Vec<SnapshotReport>> {
    let rows = featurize(ds, window_months, exp.grace);
    specs
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let prepared = prepare_rows(&rows, window_months, spec)?;
            let outcome = run_single(&prepared, kind, exp)?;
            Ok(SnapshotReport {
                snapshot: Snapshot::describe(format!("Set {}", i + 1), *spec, &prepared.raw),
                report: outcome.report,
            })
        })
        .collect()
}

pub fn write_snapshots_csv<W: Write>(writer: W, reports: &[SnapshotReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "dataset",
        "train",
        "validation",
        "test",
        "train_ratio",
        "validation_ratio",
        "test_ratio",
        "baseline",
        "accuracy",
        "f1",
    ])?;
    let range = |(a, b): (crate::domain::YearMonth, crate::domain::YearMonth)| format!("{a}/{b}");
    for r in reports {
        let s = &r.snapshot;
        w.write_record([
            s.label.clone(),
            range(s.spec.train()),
            range(s.spec.validation()),
            range(s.spec.test()),
            s.train_ratio.to_string(),
            s.validation_ratio.to_string(),
            s.test_ratio.to_string(),
            s.baseline.to_string(),
            r.report.accuracy.to_string(),
            r.report.f1_late.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
