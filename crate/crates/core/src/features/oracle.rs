//! Brute-force reference for [`extract_features`](super::extract_features).
//!
//! Scans the whole dataset with no index, derives the window start with
//! chrono's month arithmetic, and recomputes every field from scratch. It is
//! slow on purpose and exists only for equivalence testing.

use chrono::{Months, NaiveDate};

use crate::domain::{GracePolicy, Invoice, PaymentLabel};
use crate::ingest::InvoiceDataset;

use super::FeatureRow;

fn population_stats(days: &[i64]) -> (Option<f64>, Option<f64>) {
    match days.len() {
        0 => (None, None),
        n => {
            let total: i64 = days.iter().sum();
            let mean = total as f64 / n as f64;
            let std = (n >= 2).then(|| {
                let ss = days
                    .iter()
                    .fold(0.0, |acc, &d| acc + (d as f64 - mean) * (d as f64 - mean));
                (ss / n as f64).sqrt()
            });
            (Some(mean), std)
        }
    }
}

pub fn extract_features_oracle(
    ds: &InvoiceDataset,
    inv: &Invoice,
    window_months: u32,
    policy: GracePolicy,
) -> FeatureRow {
    let cutoff = inv.creation_date;
    let window_start = cutoff
        .checked_sub_months(Months::new(window_months))
        .expect("date in range");
    let grace = chrono::Duration::days(i64::from(policy.grace_days));

    let mut history: Vec<&Invoice> = ds
        .invoices()
        .iter()
        .filter(|h| {
            h.customer_id == inv.customer_id
                && h.creation_date >= window_start
                && h.creation_date < cutoff
        })
        .collect();
    history.sort_by(|a, b| (a.creation_date, &a.invoice_id).cmp(&(b.creation_date, &b.invoice_id)));

    let known = |h: &Invoice| -> Option<NaiveDate> { h.payment_date.filter(|&p| p < cutoff) };
    let paid: Vec<&Invoice> = history
        .iter()
        .copied()
        .filter(|h| known(h).is_some())
        .collect();
    let open: Vec<&Invoice> = history
        .iter()
        .copied()
        .filter(|h| known(h).is_none())
        .collect();
    let late: Vec<&Invoice> = paid
        .iter()
        .copied()
        .filter(|h| known(h).unwrap() > h.due_date + grace)
        .collect();
    let open_late: Vec<&Invoice> = open
        .iter()
        .copied()
        .filter(|h| cutoff > h.due_date + grace)
        .collect();
    let amount_sum = |set: &[&Invoice]| set.iter().fold(0.0, |acc, h| acc + h.amount);

    let late_days: Vec<i64> = late
        .iter()
        .map(|h| (known(h).unwrap() - h.due_date).num_days())
        .collect();
    let open_late_days: Vec<i64> = open_late
        .iter()
        .map(|h| (cutoff - h.due_date).num_days())
        .collect();
    let (average_days_late, std_dev_invoices_late) = population_stats(&late_days);
    let (average_days_outstanding_late, std_dev_outstanding_late) =
        population_stats(&open_late_days);

    let mut paid_invoice = [-1i8; 3];
    for (k, slot) in paid_invoice.iter_mut().enumerate() {
        let Some(h) = history.len().checked_sub(k + 1).map(|i| history[i]) else {
            continue;
        };
        *slot = match known(h) {
            Some(p) if p <= h.due_date + grace => 1,
            Some(_) => 0,
            None if cutoff > h.due_date + grace => 0,
            None => -1,
        };
    }

    let label = inv.payment_date.map(|p| {
        if p > inv.due_date + grace {
            PaymentLabel::Late
        } else {
            PaymentLabel::OnTime
        }
    });

    FeatureRow {
        invoice_id: inv.invoice_id.clone(),
        creation_date: inv.creation_date,
        amount: inv.amount,
        paid_invoice,
        total_paid_invoices: paid.len() as u32,
        sum_amount_paid_invoices: amount_sum(&paid),
        total_invoices_late: late.len() as u32,
        sum_amount_late_invoices: amount_sum(&late),
        total_outstanding_invoices: open.len() as u32,
        total_outstanding_late: open_late.len() as u32,
        sum_total_outstanding: amount_sum(&open),
        sum_late_outstanding: amount_sum(&open_late),
        average_days_late,
        average_days_outstanding_late,
        std_dev_invoices_late,
        std_dev_outstanding_late,
        payment_frequency: paid.len() as u32,
        paid_ratio: (!history.is_empty()).then(|| paid.len() as f64 / history.len() as f64),
        late_ratio: (!paid.is_empty()).then(|| late.len() as f64 / paid.len() as f64),
        label,
    }
}
