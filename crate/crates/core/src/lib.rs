//! Late-payment prediction for accounts-receivable invoices.
//!
//! The pipeline runs from raw invoices to a prioritized customer list:
//! [`ingest`] loads and validates invoices, [`features`] computes windowed
//! history features at each creation date, [`split`] partitions rows by
//! creation month, [`models`] fits and persists classifiers, [`eval`] scores
//! them, and [`rank`] orders customers by expected late amount. [`synth`]
//! produces seeded synthetic invoice histories.

pub mod domain;
pub mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod models;
pub mod rank;
pub mod split;
pub mod synth;

pub use domain::{label_invoice, GracePolicy, Invoice, PaymentLabel, YearMonth};
pub use error::{Error, Result};
pub use eval::{Experiment, MetricsReport};
pub use features::{FeatureLayout, FeatureRow, ImputationStats};
pub use ingest::InvoiceDataset;
pub use models::{ModelConfig, ModelKind, TrainedModel};
pub use rank::{RankedList, TauReport};
pub use split::{Snapshot, SplitSpec};
pub use synth::GeneratorConfig;
