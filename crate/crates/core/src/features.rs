//! Windowed payment-history features computed at each invoice's creation date.
//!
//! All history comes through [`InvoiceDataset::history_iter`], which hides
//! invoices created on or after the cutoff and payments dated on or after it,
//! so no feature can see the future.

use std::io::Write;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{label_invoice, subtract_months, GracePolicy, Invoice, PaymentLabel};
use crate::error::{Error, Result};
use crate::ingest::{InvoiceDataset, KnownInvoice};

pub mod oracle;

/// Model input columns, in [`FeatureRow`] field order.
pub const FEATURE_NAMES: [&str; 17] = [
    "amount",
    "paid_invoice_1",
    "paid_invoice_2",
    "paid_invoice_3",
    "total_paid_invoices",
    "sum_amount_paid_invoices",
    "total_invoices_late",
    "sum_amount_late_invoices",
    "total_outstanding_invoices",
    "total_outstanding_late",
    "sum_total_outstanding",
    "sum_late_outstanding",
    "average_days_late",
    "average_days_outstanding_late",
    "std_dev_invoices_late",
    "std_dev_outstanding_late",
    "payment_frequency",
];

/// Optional ratio columns appended when [`FeatureLayout::include_ratios`] is set.
pub const RATIO_FEATURE_NAMES: [&str; 2] = ["paid_ratio", "late_ratio"];

/// Indicator for a prior invoice paid on time.
pub const PAID_ON_TIME: i8 = 1;
/// Indicator for a prior invoice paid late, or outstanding and already late.
pub const PAID_LATE: i8 = 0;
/// No such prior invoice, or outstanding and not yet late.
pub const NO_PAYMENT_INFO: i8 = -1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub invoice_id: String,
    pub creation_date: NaiveDate,
    pub amount: f64,
    /// Most recent prior invoice first.
    pub paid_invoice: [i8; 3],
    pub total_paid_invoices: u32,
    pub sum_amount_paid_invoices: f64,
    pub total_invoices_late: u32,
    pub sum_amount_late_invoices: f64,
    pub total_outstanding_invoices: u32,
    pub total_outstanding_late: u32,
    pub sum_total_outstanding: f64,
    pub sum_late_outstanding: f64,
    pub average_days_late: Option<f64>,
    pub average_days_outstanding_late: Option<f64>,
    pub std_dev_invoices_late: Option<f64>,
    pub std_dev_outstanding_late: Option<f64>,
    pub payment_frequency: u32,
    /// Paid share of the window's invoices.
    pub paid_ratio: Option<f64>,
    /// Late share of the window's paid invoices.
    pub late_ratio: Option<f64>,
    /// `None` for censored invoices.
    pub label: Option<PaymentLabel>,
}

impl FeatureRow {
    /// A row with no history at all.
    pub fn empty(inv: &Invoice, label: Option<PaymentLabel>) -> Self {
        Self {
            invoice_id: inv.invoice_id.clone(),
            creation_date: inv.creation_date,
            amount: inv.amount,
            paid_invoice: [NO_PAYMENT_INFO; 3],
            total_paid_invoices: 0,
            sum_amount_paid_invoices: 0.0,
            total_invoices_late: 0,
            sum_amount_late_invoices: 0.0,
            total_outstanding_invoices: 0,
            total_outstanding_late: 0,
            sum_total_outstanding: 0.0,
            sum_late_outstanding: 0.0,
            average_days_late: None,
            average_days_outstanding_late: None,
            std_dev_invoices_late: None,
            std_dev_outstanding_late: None,
            payment_frequency: 0,
            paid_ratio: None,
            late_ratio: None,
            label,
        }
    }

    pub fn is_labeled(&self) -> bool {
        self.label.is_some()
    }

    pub fn is_complete(&self) -> bool {
        self.average_days_late.is_some()
            && self.average_days_outstanding_late.is_some()
            && self.std_dev_invoices_late.is_some()
            && self.std_dev_outstanding_late.is_some()
            && self.paid_ratio.is_some()
            && self.late_ratio.is_some()
    }

    fn cells(&self, layout: FeatureLayout) -> Vec<(&'static str, Option<f64>)> {
        let mut cells = vec![
            ("amount", Some(self.amount)),
            ("paid_invoice_1", Some(f64::from(self.paid_invoice[0]))),
            ("paid_invoice_2", Some(f64::from(self.paid_invoice[1]))),
            ("paid_invoice_3", Some(f64::from(self.paid_invoice[2]))),
            (
                "total_paid_invoices",
                Some(f64::from(self.total_paid_invoices)),
            ),
            (
                "sum_amount_paid_invoices",
                Some(self.sum_amount_paid_invoices),
            ),
            (
                "total_invoices_late",
                Some(f64::from(self.total_invoices_late)),
            ),
            (
                "sum_amount_late_invoices",
                Some(self.sum_amount_late_invoices),
            ),
            (
                "total_outstanding_invoices",
                Some(f64::from(self.total_outstanding_invoices)),
            ),
            (
                "total_outstanding_late",
                Some(f64::from(self.total_outstanding_late)),
            ),
            ("sum_total_outstanding", Some(self.sum_total_outstanding)),
            ("sum_late_outstanding", Some(self.sum_late_outstanding)),
            ("average_days_late", self.average_days_late),
            (
                "average_days_outstanding_late",
                self.average_days_outstanding_late,
            ),
            ("std_dev_invoices_late", self.std_dev_invoices_late),
            ("std_dev_outstanding_late", self.std_dev_outstanding_late),
            ("payment_frequency", Some(f64::from(self.payment_frequency))),
        ];
        if layout.include_ratios {
            cells.push(("paid_ratio", self.paid_ratio));
            cells.push(("late_ratio", self.late_ratio));
        }
        cells
    }

    /// Numeric model input. Fails if any included field is still missing.
    pub fn to_vector(&self, layout: FeatureLayout) -> Result<Vec<f64>> {
        self.cells(layout)
            .into_iter()
            .map(|(name, v)| v.ok_or(Error::MissingFeature(name)))
            .collect()
    }
}

/// Which columns feed the models.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    /// Ratio columns carry many missing values on short histories, so they are off by default.
    pub include_ratios: bool,
}

impl FeatureLayout {
    pub fn names(self) -> Vec<String> {
        let mut names: Vec<String> = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
        if self.include_ratios {
            names.extend(RATIO_FEATURE_NAMES.iter().map(|s| s.to_string()));
        }
        names
    }

    pub fn len(self) -> usize {
        FEATURE_NAMES.len()
            + if self.include_ratios {
                RATIO_FEATURE_NAMES.len()
            } else {
                0
            }
    }

    pub fn is_empty(self) -> bool {
        false
    }
}

/// Mean and population standard deviation; the deviation needs two observations.
pub(crate) fn mean_and_std(days: &[i64]) -> (Option<f64>, Option<f64>) {
    if days.is_empty() {
        return (None, None);
    }
    let n = days.len() as f64;
    let mean = days.iter().sum::<i64>() as f64 / n;
    if days.len() < 2 {
        return (Some(mean), None);
    }
    let mut ss = 0.0;
    for &d in days {
        let dev = d as f64 - mean;
        ss += dev * dev;
    }
    (Some(mean), Some((ss / n).sqrt()))
}

fn payment_indicator(h: &KnownInvoice<'_>, cutoff: NaiveDate, policy: GracePolicy) -> i8 {
    let deadline = policy.deadline(h.invoice.due_date);
    match h.known_payment {
        Some(paid) if paid <= deadline => PAID_ON_TIME,
        Some(_) => PAID_LATE,
        None if cutoff > deadline => PAID_LATE,
        None => NO_PAYMENT_INFO,
    }
}

/// Computes the (pre-imputation) feature row of `inv` from the `window_months`
/// months of history before its creation date.
pub fn extract_features(
    ds: &InvoiceDataset,
    inv: &Invoice,
    window_months: u32,
    policy: GracePolicy,
) -> FeatureRow {
    assert!(window_months >= 1, "window must span at least one month");
    let cutoff = inv.creation_date;
    let window_start = subtract_months(cutoff, window_months);
    let mut row = FeatureRow::empty(inv, label_invoice(inv, policy).ok());

    let mut late_days = Vec::new();
    let mut outstanding_late_days = Vec::new();
    let history = ds.history_iter(&inv.customer_id, cutoff, window_start);
    let n_history = history.len();
    for h in history.clone() {
        let amount = h.invoice.amount;
        let deadline = policy.deadline(h.invoice.due_date);
        match h.known_payment {
            Some(paid) => {
                row.total_paid_invoices += 1;
                row.sum_amount_paid_invoices += amount;
                if paid > deadline {
                    row.total_invoices_late += 1;
                    row.sum_amount_late_invoices += amount;
                    late_days.push((paid - h.invoice.due_date).num_days());
                }
            }
            None => {
                row.total_outstanding_invoices += 1;
                row.sum_total_outstanding += amount;
                if cutoff > deadline {
                    row.total_outstanding_late += 1;
                    row.sum_late_outstanding += amount;
                    outstanding_late_days.push((cutoff - h.invoice.due_date).num_days());
                }
            }
        }
    }
    for (slot, h) in row.paid_invoice.iter_mut().zip(history.rev()) {
        *slot = payment_indicator(&h, cutoff, policy);
    }

    (row.average_days_late, row.std_dev_invoices_late) = mean_and_std(&late_days);
    (
        row.average_days_outstanding_late,
        row.std_dev_outstanding_late,
    ) = mean_and_std(&outstanding_late_days);
    row.payment_frequency = row.total_paid_invoices;
    if n_history > 0 {
        row.paid_ratio = Some(f64::from(row.total_paid_invoices) / n_history as f64);
    }
    if row.total_paid_invoices > 0 {
        row.late_ratio =
            Some(f64::from(row.total_invoices_late) / f64::from(row.total_paid_invoices));
    }
    row
}

/// Feature rows for every invoice in dataset order `(creation_date, invoice_id)`.
pub fn featurize(ds: &InvoiceDataset, window_months: u32, policy: GracePolicy) -> Vec<FeatureRow> {
    ds.invoices()
        .par_iter()
        .map(|inv| extract_features(ds, inv, window_months, policy))
        .collect()
}

/// Training-set means used to fill missing day statistics and ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImputationStats {
    pub average_days_late: f64,
    pub average_days_outstanding_late: f64,
    pub std_dev_invoices_late: f64,
    pub std_dev_outstanding_late: f64,
    pub paid_ratio: f64,
    pub late_ratio: f64,
}

fn mean_present(values: impl Iterator<Item = Option<f64>>) -> f64 {
    let (sum, n) = values
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Per-field mean over the non-missing training values; 0 when a field is
/// missing everywhere.
pub fn fit_imputation(rows: &[FeatureRow]) -> Result<ImputationStats> {
    if rows.is_empty() {
        return Err(Error::Training(
            "imputation needs at least one training row".into(),
        ));
    }
    Ok(ImputationStats {
        average_days_late: mean_present(rows.iter().map(|r| r.average_days_late)),
        average_days_outstanding_late: mean_present(
            rows.iter().map(|r| r.average_days_outstanding_late),
        ),
        std_dev_invoices_late: mean_present(rows.iter().map(|r| r.std_dev_invoices_late)),
        std_dev_outstanding_late: mean_present(rows.iter().map(|r| r.std_dev_outstanding_late)),
        paid_ratio: mean_present(rows.iter().map(|r| r.paid_ratio)),
        late_ratio: mean_present(rows.iter().map(|r| r.late_ratio)),
    })
}

/// Fills every missing field with its training mean. Counts and sums are never
/// missing; an empty history already yields zeros there.
pub fn impute(row: &FeatureRow, stats: &ImputationStats) -> FeatureRow {
    let mut out = row.clone();
    out.average_days_late.get_or_insert(stats.average_days_late);
    out.average_days_outstanding_late
        .get_or_insert(stats.average_days_outstanding_late);
    out.std_dev_invoices_late
        .get_or_insert(stats.std_dev_invoices_late);
    out.std_dev_outstanding_late
        .get_or_insert(stats.std_dev_outstanding_late);
    out.paid_ratio.get_or_insert(stats.paid_ratio);
    out.late_ratio.get_or_insert(stats.late_ratio);
    out
}

fn label_cell(label: Option<PaymentLabel>) -> &'static str {
    label.map_or("censored", PaymentLabel::as_str)
}

/// Writes one row per invoice; missing values are empty cells.
pub fn write_features_csv<W: Write>(
    writer: W,
    rows: &[FeatureRow],
    layout: FeatureLayout,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["invoice_id".to_string(), "creation_date".to_string()];
    header.extend(layout.names());
    header.push("label".into());
    wtr.write_record(&header)?;
    for row in rows {
        let mut record = vec![
            row.invoice_id.clone(),
            row.creation_date.format("%Y-%m-%d").to_string(),
        ];
        record.extend(
            row.cells(layout)
                .into_iter()
                .map(|(_, v)| v.map(|x| x.to_string()).unwrap_or_default()),
        );
        record.push(label_cell(row.label).to_string());
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(|e| Error::io("<features csv>", e))?;
    Ok(())
}
