//! Invoice CSV ingestion, validation and the per-customer history index.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::Serialize;

use crate::domain::Invoice;
use crate::error::{Error, Result};

pub const INVOICE_HEADER: [&str; 7] = [
    "invoice_id",
    "customer_id",
    "country",
    "amount",
    "creation_date",
    "due_date",
    "payment_date",
];

const DATE_FORMAT: &str = "%Y-%m-%d";

/// Why a row was rejected during ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RejectReason {
    EmptyId,
    BadAmount,
    NonPositiveAmount,
    BadDate,
    DueBeforeCreation,
    PaymentBeforeCreation,
    DuplicateId,
    MalformedRow,
}

impl RejectReason {
    pub fn code(self) -> &'static str {
        match self {
            RejectReason::EmptyId => "EMPTY_ID",
            RejectReason::BadAmount => "BAD_AMOUNT",
            RejectReason::NonPositiveAmount => "NON_POSITIVE_AMOUNT",
            RejectReason::BadDate => "BAD_DATE",
            RejectReason::DueBeforeCreation => "DUE_BEFORE_CREATION",
            RejectReason::PaymentBeforeCreation => "PAYMENT_BEFORE_CREATION",
            RejectReason::DuplicateId => "DUPLICATE_ID",
            RejectReason::MalformedRow => "MALFORMED_ROW",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Checks the single-invoice invariants (everything except id uniqueness).
pub fn check_invoice(inv: &Invoice) -> std::result::Result<(), RejectReason> {
    if inv.invoice_id.is_empty() || inv.customer_id.is_empty() {
        return Err(RejectReason::EmptyId);
    }
    if !inv.amount.is_finite() {
        return Err(RejectReason::BadAmount);
    }
    if inv.amount <= 0.0 {
        return Err(RejectReason::NonPositiveAmount);
    }
    if inv.due_date < inv.creation_date {
        return Err(RejectReason::DueBeforeCreation);
    }
    if matches!(inv.payment_date, Some(p) if p < inv.creation_date) {
        return Err(RejectReason::PaymentBeforeCreation);
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub row_count: usize,
    pub accepted: usize,
    pub rejected: usize,
    /// (1-based data row number, reason)
    pub rejections: Vec<(usize, RejectReason)>,
}

/// An invoice as visible at some cutoff: payments on or after the cutoff are hidden.
#[derive(Debug, Clone, Copy)]
pub struct KnownInvoice<'a> {
    pub invoice: &'a Invoice,
    pub known_payment: Option<NaiveDate>,
}

impl KnownInvoice<'_> {
    pub fn to_invoice(&self) -> Invoice {
        Invoice {
            payment_date: self.known_payment,
            ..self.invoice.clone()
        }
    }
}

/// Immutable invoice collection sorted by `(creation_date, invoice_id)` with a
/// per-customer chronological index.
#[derive(Debug, Clone, Default)]
pub struct InvoiceDataset {
    invoices: Vec<Invoice>,
    by_customer: BTreeMap<String, Vec<usize>>,
}

impl InvoiceDataset {
    /// Builds the dataset, validating every invoice and rejecting duplicate ids.
    pub fn new(mut invoices: Vec<Invoice>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(invoices.len());
        for (i, inv) in invoices.iter().enumerate() {
            check_invoice(inv).map_err(|reason| Error::InvalidRow { row: i + 1, reason })?;
            if !seen.insert(inv.invoice_id.as_str()) {
                return Err(Error::InvalidRow {
                    row: i + 1,
                    reason: RejectReason::DuplicateId,
                });
            }
        }
        invoices.sort_by(|a, b| {
            (a.creation_date, &a.invoice_id).cmp(&(b.creation_date, &b.invoice_id))
        });
        let mut by_customer: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, inv) in invoices.iter().enumerate() {
            by_customer
                .entry(inv.customer_id.clone())
                .or_default()
                .push(i);
        }
        Ok(Self {
            invoices,
            by_customer,
        })
    }

    pub fn invoices(&self) -> &[Invoice] {
        &self.invoices
    }

    pub fn len(&self) -> usize {
        self.invoices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.invoices.is_empty()
    }

    pub fn customers(&self) -> impl Iterator<Item = &str> {
        self.by_customer.keys().map(String::as_str)
    }

    /// The customer's invoices in chronological order.
    pub fn customer_invoices(&self, customer_id: &str) -> impl Iterator<Item = &Invoice> {
        self.by_customer
            .get(customer_id)
            .map(Vec::as_slice)
            .unwrap_or(&[])
            .iter()
            .map(move |&i| &self.invoices[i])
    }

    pub fn first_creation_date(&self) -> Option<NaiveDate> {
        self.invoices.first().map(|i| i.creation_date)
    }

    pub fn last_creation_date(&self) -> Option<NaiveDate> {
        self.invoices.last().map(|i| i.creation_date)
    }

    /// Borrowing form of [`history_before`](Self::history_before): the customer's
    /// invoices created in `[window_start, cutoff)`, each truncated to what was
    /// known at `cutoff`.
    pub fn history_iter<'a>(
        &'a self,
        customer_id: &str,
        cutoff: NaiveDate,
        window_start: NaiveDate,
    ) -> impl DoubleEndedIterator<Item = KnownInvoice<'a>> + ExactSizeIterator + Clone + 'a {
        let idx: &[usize] = self
            .by_customer
            .get(customer_id)
            .map(Vec::as_slice)
            .unwrap_or(&[]);
        let lo = idx.partition_point(|&i| self.invoices[i].creation_date < window_start);
        let hi = idx.partition_point(|&i| self.invoices[i].creation_date < cutoff);
        let slice = if lo < hi { &idx[lo..hi] } else { &idx[0..0] };
        slice.iter().map(move |&i| {
            let invoice = &self.invoices[i];
            KnownInvoice {
                invoice,
                known_payment: invoice.payment_date.filter(|p| *p < cutoff),
            }
        })
    }

    /// The customer's invoices created in `[window_start, cutoff)`; any payment
    /// dated on or after `cutoff` is reported as absent.
    pub fn history_before(
        &self,
        customer_id: &str,
        cutoff: NaiveDate,
        window_start: NaiveDate,
    ) -> Vec<Invoice> {
        self.history_iter(customer_id, cutoff, window_start)
            .map(|k| k.to_invoice())
            .collect()
    }
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn parse_date(s: &str) -> std::result::Result<NaiveDate, RejectReason> {
    NaiveDate::parse_from_str(s.trim(), DATE_FORMAT).map_err(|_| RejectReason::BadDate)
}

/// Reads invoices from any CSV source. See [`parse_csv`].
pub fn read_csv<R: Read>(reader: R, strict: bool) -> Result<(InvoiceDataset, ValidationReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut cols = [0usize; 7];
    for (slot, name) in cols.iter_mut().zip(INVOICE_HEADER) {
        *slot = column_index(&headers, name)?;
    }
    let [c_id, c_cust, c_country, c_amount, c_created, c_due, c_paid] = cols;

    let mut report = ValidationReport::default();
    let mut invoices = Vec::new();
    let mut seen = HashSet::new();

    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        report.row_count += 1;
        let parsed = record
            .map_err(|_| RejectReason::MalformedRow)
            .and_then(|rec| {
                let field = |c: usize| rec.get(c).ok_or(RejectReason::MalformedRow);
                let amount: f64 = field(c_amount)?
                    .trim()
                    .parse()
                    .map_err(|_| RejectReason::BadAmount)?;
                let paid = field(c_paid)?.trim();
                let country = field(c_country)?.trim();
                let inv = Invoice {
                    invoice_id: field(c_id)?.trim().to_string(),
                    customer_id: field(c_cust)?.trim().to_string(),
                    country: (!country.is_empty()).then(|| country.to_string()),
                    amount,
                    creation_date: parse_date(field(c_created)?)?,
                    due_date: parse_date(field(c_due)?)?,
                    payment_date: if paid.is_empty() {
                        None
                    } else {
                        Some(parse_date(paid)?)
                    },
                };
                check_invoice(&inv)?;
                if seen.contains(&inv.invoice_id) {
                    return Err(RejectReason::DuplicateId);
                }
                Ok(inv)
            });
        match parsed {
            Ok(inv) => {
                seen.insert(inv.invoice_id.clone());
                invoices.push(inv);
                report.accepted += 1;
            }
            Err(reason) => {
                if strict {
                    return Err(Error::InvalidRow { row, reason });
                }
                report.rejected += 1;
                report.rejections.push((row, reason));
            }
        }
    }
    Ok((InvoiceDataset::new(invoices)?, report))
}

/// Parses an invoice CSV. Invalid rows are rejected and reported; in strict
/// mode the first invalid row fails the whole read.
pub fn parse_csv(
    path: impl AsRef<Path>,
    strict: bool,
) -> Result<(InvoiceDataset, ValidationReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, strict)
}

fn format_date(d: NaiveDate) -> String {
    d.format(DATE_FORMAT).to_string()
}

pub fn write_csv_to<W: Write>(writer: W, invoices: &[Invoice]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(INVOICE_HEADER)?;
    for inv in invoices {
        wtr.write_record([
            inv.invoice_id.as_str(),
            inv.customer_id.as_str(),
            inv.country.as_deref().unwrap_or(""),
            &inv.amount.to_string(),
            &format_date(inv.creation_date),
            &format_date(inv.due_date),
            &inv.payment_date.map(format_date).unwrap_or_default(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn write_csv(path: impl AsRef<Path>, invoices: &[Invoice]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(std::io::BufWriter::new(file), invoices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HEADER: &str =
        "invoice_id,customer_id,country,amount,creation_date,due_date,payment_date\n";

    fn read(body: &str, strict: bool) -> Result<(InvoiceDataset, ValidationReport)> {
        read_csv(format!("{HEADER}{body}").as_bytes(), strict)
    }

    fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn inv(id: &str, cust: &str, created: &str, paid: Option<&str>) -> Invoice {
        let c = date(created);
        Invoice {
            invoice_id: id.into(),
            customer_id: cust.into(),
            country: Some("BR".into()),
            amount: 100.0,
            creation_date: c,
            due_date: c + chrono::Duration::days(30),
            payment_date: paid.map(date),
        }
    }

    #[test]
    fn well_formed_file() {
        let (ds, rep) = read(
            "A,C1,BR,10.50,2019-01-01,2019-01-31,2019-02-02\n\
             B,C1,,20,2019-01-05,2019-02-04,\n\
             \"C,x\",C2,MX,7.25,2019-01-03,2019-02-02,2019-02-01\n",
            true,
        )
        .unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(rep.rejected, 0);
        assert_eq!(rep.accepted, 3);
        let ids: Vec<_> = ds
            .invoices()
            .iter()
            .map(|i| i.invoice_id.as_str())
            .collect();
        assert_eq!(ids, ["A", "C,x", "B"]);
        assert_eq!(ds.invoices()[2].country, None);
        assert_eq!(ds.invoices()[2].payment_date, None);
    }

    #[test]
    fn rejects_bad_rows() {
        let (ds, rep) = read(
            "A,C1,BR,-5.00,2019-01-01,2019-01-31,\n\
             B,C1,BR,5,2019-01-01,2019-01-31,\n\
             B,C2,BR,5,2019-01-02,2019-01-31,\n\
             D,C1,BR,5,2019-02-30,2019-03-31,\n\
             E,C1,BR,5,2019-01-10,2019-01-31,2019-01-09\n\
             F,C1,BR,abc,2019-01-10,2019-01-31,\n\
             G,C1,BR,5,2019-01-10,2019-01-01,\n",
            false,
        )
        .unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(rep.row_count, 7);
        assert_eq!(rep.accepted + rep.rejected, rep.row_count);
        assert_eq!(
            rep.rejections,
            vec![
                (1, RejectReason::NonPositiveAmount),
                (3, RejectReason::DuplicateId),
                (4, RejectReason::BadDate),
                (5, RejectReason::PaymentBeforeCreation),
                (6, RejectReason::BadAmount),
                (7, RejectReason::DueBeforeCreation),
            ]
        );
    }

    #[test]
    fn strict_mode_fails_fast() {
        let err = read(
            "A,C1,BR,5,2019-01-01,2019-01-31,\nA,C1,BR,5,2019-01-01,2019-01-31,\n",
            true,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::InvalidRow {
                row: 2,
                reason: RejectReason::DuplicateId
            }
        ));
    }

    #[test]
    fn missing_column() {
        let err = read_csv("invoice_id,customer_id,amount\nA,C,1\n".as_bytes(), false).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "country"));
    }

    #[test]
    fn history_half_open_window() {
        let ds = InvoiceDataset::new(vec![
            inv("a", "C", "2019-01-01", Some("2019-01-20")),
            inv("b", "C", "2019-02-01", Some("2019-03-05")),
            inv("c", "C", "2019-03-01", None),
        ])
        .unwrap();
        let h = ds.history_before("C", date("2019-03-01"), date("2019-01-15"));
        assert_eq!(h.len(), 1);
        assert_eq!(h[0].invoice_id, "b");
        // paid Mar 5, after the cutoff: not yet known
        assert_eq!(h[0].payment_date, None);
        assert!(ds
            .history_before("C", date("2019-02-01"), date("2019-02-01"))
            .is_empty());
        assert!(ds
            .history_before("nobody", date("2019-03-01"), date("2018-01-01"))
            .is_empty());
        let all = ds.history_before("C", date("2019-03-02"), date("2018-01-01"));
        assert_eq!(all.len(), 3);
        assert_eq!(all[0].payment_date, Some(date("2019-01-20")));
    }

    #[test]
    fn truncation_matches_event_replay() {
        // Replay every event up to the cutoff and compare with the accessor.
        let invoices = vec![
            inv("a", "C", "2019-01-01", Some("2019-02-28")),
            inv("b", "C", "2019-01-10", Some("2019-03-01")),
            inv("c", "C", "2019-01-20", Some("2019-03-02")),
            inv("d", "C", "2019-02-15", None),
        ];
        let ds = InvoiceDataset::new(invoices.clone()).unwrap();
        let cutoff = date("2019-03-01");
        let mut events: Vec<(NaiveDate, usize, bool)> = Vec::new();
        for (i, v) in invoices.iter().enumerate() {
            events.push((v.creation_date, i, false));
            if let Some(p) = v.payment_date {
                events.push((p, i, true));
            }
        }
        events.sort();
        let mut state: Vec<Option<Option<NaiveDate>>> = vec![None; invoices.len()];
        for (d, i, is_payment) in events {
            if d >= cutoff {
                break;
            }
            state[i] = Some(if is_payment { Some(d) } else { None });
        }
        let replay: Vec<_> = state
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|p| (invoices[i].invoice_id.clone(), p)))
            .collect();
        let got: Vec<_> = ds
            .history_before("C", cutoff, date("2018-12-01"))
            .into_iter()
            .map(|v| (v.invoice_id, v.payment_date))
            .collect();
        assert_eq!(got, replay);
    }

    fn arb_invoice(i: usize) -> impl Strategy<Value = Invoice> {
        (
            0u32..5,
            1u32..1_000_000,
            0i64..700,
            0i64..60,
            proptest::option::of(0i64..120),
        )
            .prop_map(move |(cust, cents, created, due_off, paid_off)| {
                let creation = date("2018-01-01") + chrono::Duration::days(created);
                Invoice {
                    invoice_id: format!("INV{i:04}"),
                    customer_id: format!("C{cust}"),
                    country: if cust % 2 == 0 {
                        Some("BR".into())
                    } else {
                        None
                    },
                    amount: f64::from(cents) / 100.0,
                    creation_date: creation,
                    due_date: creation + chrono::Duration::days(due_off),
                    payment_date: paid_off.map(|o| creation + chrono::Duration::days(o)),
                }
            })
    }

    proptest! {
        #[test]
        fn csv_round_trip(invoices in (0usize..40).prop_flat_map(|n| (0..n).map(arb_invoice).collect::<Vec<_>>())) {
            let ds = InvoiceDataset::new(invoices).unwrap();
            let mut buf = Vec::new();
            write_csv_to(&mut buf, ds.invoices()).unwrap();
            let (back, rep) = read_csv(buf.as_slice(), true).unwrap();
            prop_assert_eq!(rep.rejected, 0);
            prop_assert_eq!(back.invoices(), ds.invoices());
        }
    }
}
