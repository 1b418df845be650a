//! Customer prioritization by expected late amount, the amount-only greedy
//! order it replaces, and Kendall's tau between the two.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;
use std::io::Write;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{GracePolicy, Invoice};
use crate::error::{Error, Result};
use crate::features::extract_features;
use crate::ingest::InvoiceDataset;
use crate::models::TrainedModel;

/// Invoice risk: amount times late probability.
pub fn invoice_risk(amount: f64, p_late: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_late) {
        return Err(Error::Probability(p_late));
    }
    Ok(amount * p_late)
}

/// Mean risk over a customer's open invoices; `None` with no open invoices.
pub fn customer_risk(risks: &[f64]) -> Option<f64> {
    if risks.is_empty() {
        None
    } else {
        Some(risks.iter().sum::<f64>() / risks.len() as f64)
    }
}

/// A scored open invoice.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenInvoice {
    pub customer_id: String,
    pub amount: f64,
    pub p_late: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub customer_id: String,
    pub risk_score: f64,
    pub total_open_amount: f64,
    pub n_open_invoices: usize,
    pub risk_rank: usize,
    pub greedy_rank: usize,
}

/// Customers ordered by `risk_rank`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub as_of: NaiveDate,
    pub entries: Vec<RankEntry>,
}

fn descending_then_id(a: f64, b: f64, id_a: &str, id_b: &str) -> Ordering {
    b.total_cmp(&a).then_with(|| id_a.cmp(id_b))
}

/// Aggregates open invoices per customer and assigns both rankings. Ties fall
/// back to ascending customer id.
pub fn rank_customers(as_of: NaiveDate, open: &[OpenInvoice]) -> Result<RankedList> {
    let mut by_customer: BTreeMap<&str, (Vec<f64>, f64)> = BTreeMap::new();
    for inv in open {
        let risk = invoice_risk(inv.amount, inv.p_late)?;
        let e = by_customer.entry(&inv.customer_id).or_default();
        e.0.push(risk);
        e.1 += inv.amount;
    }
    let mut entries: Vec<RankEntry> = by_customer
        .into_iter()
        .filter_map(|(id, (risks, total))| {
            Some(RankEntry {
                customer_id: id.to_string(),
                risk_score: customer_risk(&risks)?,
                total_open_amount: total,
                n_open_invoices: risks.len(),
                risk_rank: 0,
                greedy_rank: 0,
            })
        })
        .collect();

    entries.sort_by(|a, b| {
        descending_then_id(
            a.total_open_amount,
            b.total_open_amount,
            &a.customer_id,
            &b.customer_id,
        )
    });
    for (i, e) in entries.iter_mut().enumerate() {
        e.greedy_rank = i + 1;
    }
    entries.sort_by(|a, b| {
        descending_then_id(a.risk_score, b.risk_score, &a.customer_id, &b.customer_id)
    });
    for (i, e) in entries.iter_mut().enumerate() {
        e.risk_rank = i + 1;
    }
    Ok(RankedList { as_of, entries })
}

/// Invoices created on or before `as_of` and not paid by the end of that day.
pub fn open_invoices_as_of(
    ds: &InvoiceDataset,
    as_of: NaiveDate,
) -> impl Iterator<Item = &Invoice> {
    ds.invoices()
        .iter()
        .take_while(move |inv| inv.creation_date <= as_of)
        .filter(move |inv| inv.payment_date.is_none_or(|p| p > as_of))
}

/// Scores each open invoice on features taken at its own creation date.
pub fn build_ranked_list(
    ds: &InvoiceDataset,
    model: &TrainedModel,
    as_of: NaiveDate,
    window_months: u32,
    policy: GracePolicy,
) -> Result<RankedList> {
    let open: Vec<&Invoice> = open_invoices_as_of(ds, as_of).collect();
    let scored = open
        .par_iter()
        .map(|inv| {
            let row = extract_features(ds, inv, window_months, policy);
            Ok(OpenInvoice {
                customer_id: inv.customer_id.clone(),
                amount: inv.amount,
                p_late: model.score_row(&row)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rank_customers(as_of, &scored)
}

impl RankedList {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "customer_id",
            "risk_score",
            "total_open_amount",
            "n_open_invoices",
            "risk_rank",
            "greedy_rank",
        ])?;
        for e in &self.entries {
            w.write_record([
                e.customer_id.clone(),
                e.risk_score.to_string(),
                e.total_open_amount.to_string(),
                e.n_open_invoices.to_string(),
                e.risk_rank.to_string(),
                e.greedy_rank.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Customer ids in risk order.
    pub fn risk_order(&self) -> Vec<&str> {
        self.entries
            .iter()
            .map(|e| e.customer_id.as_str())
            .collect()
    }

    /// Customer ids in greedy order.
    pub fn greedy_order(&self) -> Vec<&str> {
        let mut e: Vec<&RankEntry> = self.entries.iter().collect();
        e.sort_by_key(|e| e.greedy_rank);
        e.into_iter().map(|e| e.customer_id.as_str()).collect()
    }

    /// Agreement between the two orderings; tau values are absent with fewer
    /// than two customers or when a score column is constant.
    pub fn tau_report(&self) -> TauReport {
        let risk: Vec<f64> = self.entries.iter().map(|e| e.risk_score).collect();
        let amount: Vec<f64> = self.entries.iter().map(|e| e.total_open_amount).collect();
        TauReport {
            as_of: self.as_of,
            n_customers: self.entries.len(),
            tau_b_scores: kendall_tau_b(&risk, &amount).ok(),
            tau_ranks: kendall_tau(&self.risk_order(), &self.greedy_order()).ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauReport {
    pub as_of: NaiveDate,
    pub n_customers: usize,
    /// Tau-b between customer risk scores and total open amounts.
    pub tau_b_scores: Option<f64>,
    /// Tau between the two tie-broken rankings.
    pub tau_ranks: Option<f64>,
}

/// Merge sort returning the number of inversions.
fn sort_count_swaps(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_count_swaps(&mut v[..mid], &mut buf[..mid]);
    swaps += sort_count_swaps(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..].copy_from_slice(&v[j..]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Sum of `t(t-1)/2` over runs of equal values in a sorted sequence.
fn tied_pairs<T: PartialEq>(sorted: impl Iterator<Item = T>) -> u64 {
    let mut total = 0u64;
    let mut run = 0u64;
    let mut prev: Option<T> = None;
    for x in sorted {
        if prev.as_ref() == Some(&x) {
            run += 1;
        } else {
            total += run * (run + 1) / 2;
            run = 0;
        }
        prev = Some(x);
    }
    total + run * (run + 1) / 2
}

/// Kendall's tau-b in `O(n log n)` (Knight's algorithm).
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Metric("tau inputs differ in length".into()));
    }
    if x.len() < 2 {
        return Err(Error::Metric("tau needs at least two items".into()));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::Metric("NaN in tau input".into()));
    }
    let n = x.len() as u64;
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));
    let tie_x = tied_pairs(idx.iter().map(|&i| x[i]));
    let tie_xy = tied_pairs(idx.iter().map(|&i| (x[i], y[i])));
    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; ys.len()];
    let swaps = sort_count_swaps(&mut ys, &mut buf);
    let tie_y = tied_pairs(ys.iter().copied());

    let n0 = n * (n - 1) / 2;
    if tie_x == n0 || tie_y == n0 {
        return Err(Error::Metric(
            "tau is undefined for a constant input".into(),
        ));
    }
    // concordant - discordant = n0 - tx - ty + txy - 2 * swaps
    let numer = n0 as f64 - tie_x as f64 - tie_y as f64 + tie_xy as f64 - 2.0 * swaps as f64;
    let denom = ((n0 - tie_x) as f64 * (n0 - tie_y) as f64).sqrt();
    Ok(numer / denom)
}

/// Tau between two orderings of the same items.
pub fn kendall_tau<T: Eq + Hash>(order_a: &[T], order_b: &[T]) -> Result<f64> {
    if order_a.len() != order_b.len() {
        return Err(Error::MismatchedItems);
    }
    let pos_b: HashMap<&T, usize> = order_b.iter().enumerate().map(|(i, t)| (t, i)).collect();
    if pos_b.len() != order_b.len() {
        return Err(Error::MismatchedItems);
    }
    let mut seen = HashMap::with_capacity(order_a.len());
    let mut rank_a = Vec::with_capacity(order_a.len());
    let mut rank_b = Vec::with_capacity(order_a.len());
    for (i, t) in order_a.iter().enumerate() {
        let j = *pos_b.get(t).ok_or(Error::MismatchedItems)?;
        if seen.insert(t, ()).is_some() {
            return Err(Error::MismatchedItems);
        }
        rank_a.push(i as f64);
        rank_b.push(j as f64);
    }
    kendall_tau_b(&rank_a, &rank_b)
}
