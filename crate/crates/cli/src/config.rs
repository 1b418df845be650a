use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use arcollect_core::models::ModelKind;
use arcollect_core::{GeneratorConfig, ModelConfig, SplitSpec, YearMonth};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnapshotConfig {
    /// Defaults to the first month of the data.
    pub start: Option<YearMonth>,
    /// Defaults to the last month of the data.
    pub end: Option<YearMonth>,
    pub train_months: u32,
    pub val_months: u32,
    pub step_months: u32,
    pub count: usize,
}

impl Default for SnapshotConfig {
    fn default() -> Self {
        Self {
            start: None,
            end: None,
            train_months: 6,
            val_months: 4,
            step_months: 3,
            count: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub windows: Vec<u32>,
    pub models: Vec<ModelKind>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            windows: (2..=12).collect(),
            models: ModelKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; also replaces `generator.seed`.
    pub seed: u64,
    /// Invoice CSV; defaults to `<out>/invoices.csv`.
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    /// Model file; defaults to `<out>/model.json`.
    pub model_path: Option<PathBuf>,
    pub window_months: u32,
    pub grace_days: u32,
    pub include_ratios: bool,
    /// Reject the whole input on the first invalid row.
    pub strict: bool,
    pub model: ModelKind,
    pub models: ModelConfig,
    pub split: SplitSpec,
    pub snapshots: SnapshotConfig,
    pub sweep: SweepConfig,
    /// Ranking date; defaults to the last creation date in the data.
    pub as_of: Option<NaiveDate>,
    /// Month of due dates for `plotdata`; defaults to the month of `as_of`.
    pub plot_month: Option<YearMonth>,
    pub generator: GeneratorConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            input: None,
            out: PathBuf::from("out"),
            model_path: None,
            window_months: 3,
            grace_days: 5,
            include_ratios: false,
            strict: false,
            model: ModelKind::Ensemble,
            models: ModelConfig::default(),
            split: SplitSpec::default(),
            snapshots: SnapshotConfig::default(),
            sweep: SweepConfig::default(),
            as_of: None,
            plot_month: None,
            generator: GeneratorConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        anyhow::ensure!(self.window_months >= 1, "window_months must be at least 1");
        anyhow::ensure!(
            self.sweep.windows.iter().all(|&w| w >= 1),
            "sweep windows must be at least 1"
        );
        anyhow::ensure!(!self.sweep.windows.is_empty(), "sweep.windows is empty");
        anyhow::ensure!(!self.sweep.models.is_empty(), "sweep.models is empty");
        anyhow::ensure!(
            !self.out.as_os_str().is_empty(),
            "output directory must not be empty"
        );
        Ok(())
    }

    pub fn input_path(&self) -> PathBuf {
        self.input
            .clone()
            .unwrap_or_else(|| self.out.join("invoices.csv"))
    }

    pub fn model_file(&self) -> PathBuf {
        self.model_path
            .clone()
            .unwrap_or_else(|| self.out.join("model.json"))
    }
}
