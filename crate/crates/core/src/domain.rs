//! Core value types: invoices, payment labels, the grace policy and the
//! calendar arithmetic shared by every other module.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// One receivable event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Invoice {
    pub invoice_id: String,
    pub customer_id: String,
    pub country: Option<String>,
    /// Base amount in account currency.
    pub amount: f64,
    pub creation_date: NaiveDate,
    pub due_date: NaiveDate,
    /// `None` while the invoice is outstanding.
    pub payment_date: Option<NaiveDate>,
}

impl Invoice {
    pub fn is_paid(&self) -> bool {
        self.payment_date.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaymentLabel {
    OnTime,
    /// The positive class.
    Late,
}

impl PaymentLabel {
    pub fn is_late(self) -> bool {
        self == PaymentLabel::Late
    }

    pub fn from_late(late: bool) -> Self {
        if late {
            PaymentLabel::Late
        } else {
            PaymentLabel::OnTime
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PaymentLabel::OnTime => "ontime",
            PaymentLabel::Late => "late",
        }
    }
}

impl fmt::Display for PaymentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Days after the due date within which a payment still counts as on time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GracePolicy {
    pub grace_days: u32,
}

impl GracePolicy {
    pub const fn new(grace_days: u32) -> Self {
        Self { grace_days }
    }

    /// Last payment date that is still on time.
    pub fn deadline(&self, due_date: NaiveDate) -> NaiveDate {
        due_date + chrono::Duration::days(i64::from(self.grace_days))
    }

    pub fn label_payment(&self, due_date: NaiveDate, payment_date: NaiveDate) -> PaymentLabel {
        PaymentLabel::from_late(payment_date > self.deadline(due_date))
    }
}

impl Default for GracePolicy {
    fn default() -> Self {
        Self { grace_days: 5 }
    }
}

/// Labels a paid invoice. Outstanding invoices are censored and yield an error.
pub fn label_invoice(inv: &Invoice, policy: GracePolicy) -> Result<PaymentLabel> {
    match inv.payment_date {
        Some(paid) => Ok(policy.label_payment(inv.due_date, paid)),
        None => Err(Error::Censored(inv.invoice_id.clone())),
    }
}

/// Whole days past due: measured at the payment date when paid, at `as_of` otherwise.
pub fn days_late(inv: &Invoice, as_of: NaiveDate) -> i64 {
    let end = inv.payment_date.unwrap_or(as_of);
    (end - inv.due_date).num_days()
}

pub fn days_in_month(year: i32, month: u32) -> u32 {
    let (ny, nm) = if month == 12 {
        (year + 1, 1)
    } else {
        (year, month + 1)
    };
    let first_next = NaiveDate::from_ymd_opt(ny, nm, 1).expect("valid month");
    first_next.pred_opt().expect("valid date").day()
}

/// Moves `d` back `months` calendar months, clamping the day to the target month's length.
pub fn subtract_months(d: NaiveDate, months: u32) -> NaiveDate {
    let total = d.year() * 12 + d.month0() as i32 - months as i32;
    let year = total.div_euclid(12);
    let month = total.rem_euclid(12) as u32 + 1;
    let day = d.day().min(days_in_month(year, month));
    NaiveDate::from_ymd_opt(year, month, day).expect("clamped day is valid")
}

/// A calendar month, ordered chronologically and written as `YYYY-MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct YearMonth {
    year: i32,
    month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Config(format!("month {month} out of range")));
        }
        Ok(Self { year, month })
    }

    pub fn of(date: NaiveDate) -> Self {
        Self {
            year: date.year(),
            month: date.month(),
        }
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        self.month
    }

    fn ordinal(self) -> i32 {
        self.year * 12 + self.month as i32 - 1
    }

    fn from_ordinal(ordinal: i32) -> Self {
        Self {
            year: ordinal.div_euclid(12),
            month: ordinal.rem_euclid(12) as u32 + 1,
        }
    }

    pub fn add_months(self, months: i32) -> Self {
        Self::from_ordinal(self.ordinal() + months)
    }

    /// Signed number of months from `self` to `other`.
    pub fn months_until(self, other: YearMonth) -> i32 {
        other.ordinal() - self.ordinal()
    }

    pub fn first_day(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("valid month")
    }

    pub fn last_day(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, days_in_month(self.year, self.month))
            .expect("valid month")
    }

    pub fn contains(self, date: NaiveDate) -> bool {
        YearMonth::of(date) == self
    }

    /// Inclusive iterator from `self` through `end`.
    pub fn range_inclusive(self, end: YearMonth) -> impl Iterator<Item = YearMonth> {
        (self.ordinal()..=end.ordinal()).map(YearMonth::from_ordinal)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("`{s}` is not a YYYY-MM month"));
        let (y, m) = s.split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        let year = y.parse().map_err(|_| bad())?;
        let month = m.parse().map_err(|_| bad())?;
        YearMonth::new(year, month).map_err(|_| bad())
    }
}

impl Serialize for YearMonth {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
