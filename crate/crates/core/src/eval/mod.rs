//! Classification metrics and the window and snapshot experiments.

mod metrics;
mod sweep;

pub use metrics::{
    auc, evaluate, late_share, majority_baseline, monthly_accuracy, report_from_scores,
    roc_and_auc, write_monthly_csv, Confusion, MetricsReport, MonthlyAccuracy, RocCurve,
};
pub use sweep::{
    prepare, prepare_rows, run_single, snapshot_sweep, window_sweep, write_snapshots_csv,
    write_sweep_csv, Experiment, Prepared, RunOutcome, SnapshotReport, SweepCell,
};
