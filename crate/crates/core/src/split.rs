//! Temporal train/validation/test partitioning by creation month, and the
//! rolling snapshot layout.

use serde::{Deserialize, Serialize};

use crate::domain::{PaymentLabel, YearMonth};
use crate::error::{Error, Result};
use crate::features::FeatureRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSplitSpec {
    train_start: YearMonth,
    train_end: YearMonth,
    val_start: YearMonth,
    val_end: YearMonth,
    test_start: YearMonth,
    test_end: YearMonth,
}

/// Inclusive month ranges for the three partitions, strictly ordered in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSplitSpec", into = "RawSplitSpec")]
pub struct SplitSpec {
    train_start: YearMonth,
    train_end: YearMonth,
    val_start: YearMonth,
    val_end: YearMonth,
    test_start: YearMonth,
    test_end: YearMonth,
}

impl TryFrom<RawSplitSpec> for SplitSpec {
    type Error = Error;

    fn try_from(r: RawSplitSpec) -> Result<Self> {
        SplitSpec::new(
            (r.train_start, r.train_end),
            (r.val_start, r.val_end),
            (r.test_start, r.test_end),
        )
    }
}

impl From<SplitSpec> for RawSplitSpec {
    fn from(s: SplitSpec) -> Self {
        RawSplitSpec {
            train_start: s.train_start,
            train_end: s.train_end,
            val_start: s.val_start,
            val_end: s.val_end,
            test_start: s.test_start,
            test_end: s.test_end,
        }
    }
}

/// Which partition a row falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partition {
    Train,
    Validation,
    Test,
}

impl SplitSpec {
    pub fn new(
        train: (YearMonth, YearMonth),
        validation: (YearMonth, YearMonth),
        test: (YearMonth, YearMonth),
    ) -> Result<Self> {
        for (name, (a, b)) in [("train", train), ("validation", validation), ("test", test)] {
            if b < a {
                return Err(Error::Config(format!("{name} range {a}..{b} is empty")));
            }
        }
        if train.1 >= validation.0 {
            return Err(Error::Config(format!(
                "train range must end before validation starts ({} >= {})",
                train.1, validation.0
            )));
        }
        if validation.1 >= test.0 {
            return Err(Error::Config(format!(
                "validation range must end before test starts ({} >= {})",
                validation.1, test.0
            )));
        }
        Ok(Self {
            train_start: train.0,
            train_end: train.1,
            val_start: validation.0,
            val_end: validation.1,
            test_start: test.0,
            test_end: test.1,
        })
    }

    pub fn train(&self) -> (YearMonth, YearMonth) {
        (self.train_start, self.train_end)
    }

    pub fn validation(&self) -> (YearMonth, YearMonth) {
        (self.val_start, self.val_end)
    }

    pub fn test(&self) -> (YearMonth, YearMonth) {
        (self.test_start, self.test_end)
    }

    pub fn assign(&self, month: YearMonth) -> Option<Partition> {
        let within = |(a, b): (YearMonth, YearMonth)| a <= month && month <= b;
        if within(self.train()) {
            Some(Partition::Train)
        } else if within(self.validation()) {
            Some(Partition::Validation)
        } else if within(self.test()) {
            Some(Partition::Test)
        } else {
            None
        }
    }
}

impl Default for SplitSpec {
    /// Twelve training months, four validation months, seven test months.
    fn default() -> Self {
        let m = |y, mo| YearMonth::new(y, mo).expect("valid month");
        SplitSpec::new(
            (m(2017, 8), m(2018, 7)),
            (m(2018, 8), m(2018, 11)),
            (m(2018, 12), m(2019, 6)),
        )
        .expect("valid default split")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Partitions {
    pub train: Vec<FeatureRow>,
    pub validation: Vec<FeatureRow>,
    pub test: Vec<FeatureRow>,
}

impl Partitions {
    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Assigns labeled rows to partitions by creation month. Censored rows and
/// rows outside every range are dropped.
pub fn split(rows: &[FeatureRow], spec: &SplitSpec) -> Result<Partitions> {
    let mut parts = Partitions::default();
    for row in rows.iter().filter(|r| r.is_labeled()) {
        match spec.assign(YearMonth::of(row.creation_date)) {
            Some(Partition::Train) => parts.train.push(row.clone()),
            Some(Partition::Validation) => parts.validation.push(row.clone()),
            Some(Partition::Test) => parts.test.push(row.clone()),
            None => {}
        }
    }
    if parts.train.is_empty() {
        return Err(Error::EmptyPartition("train"));
    }
    if parts.validation.is_empty() {
        return Err(Error::EmptyPartition("validation"));
    }
    if parts.test.is_empty() {
        return Err(Error::EmptyPartition("test"));
    }
    Ok(parts)
}

/// Rolling layout: snapshot `k` trains on `train_months` months starting
/// `k * step_months` after `data_start`, validates on the next `val_months`,
/// and tests on everything left through `data_end`.
pub fn make_snapshots(
    data_start: YearMonth,
    data_end: YearMonth,
    train_months: u32,
    val_months: u32,
    step_months: u32,
    count: usize,
) -> Result<Vec<SplitSpec>> {
    if train_months == 0 || val_months == 0 || count == 0 {
        return Err(Error::Config(
            "train_months, val_months and count must be positive".into(),
        ));
    }
    if step_months == 0 && count > 1 {
        return Err(Error::Config("step_months must be positive".into()));
    }
    (0..count)
        .map(|k| {
            let train_start = data_start.add_months((k as u32 * step_months) as i32);
            let train_end = train_start.add_months(train_months as i32 - 1);
            let val_start = train_end.add_months(1);
            let val_end = val_start.add_months(val_months as i32 - 1);
            let test_start = val_end.add_months(1);
            if test_start > data_end {
                return Err(Error::Horizon(format!(
                    "snapshot {} would test from {test_start}, after the data ends at {data_end}",
                    k + 1
                )));
            }
            SplitSpec::new(
                (train_start, train_end),
                (val_start, val_end),
                (test_start, data_end),
            )
        })
        .collect()
}

/// One rolling snapshot with its partition shares and test baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub label: String,
    pub spec: SplitSpec,
    pub train_ratio: f64,
    pub validation_ratio: f64,
    pub test_ratio: f64,
    /// Late share of the test partition.
    pub baseline: f64,
}

pub(crate) fn late_share(rows: &[FeatureRow]) -> f64 {
    let late = rows
        .iter()
        .filter(|r| r.label == Some(PaymentLabel::Late))
        .count();
    late as f64 / rows.len() as f64
}

impl Snapshot {
    pub fn describe(label: impl Into<String>, spec: SplitSpec, parts: &Partitions) -> Self {
        let n = parts.len() as f64;
        Self {
            label: label.into(),
            spec,
            train_ratio: parts.train.len() as f64 / n,
            validation_ratio: parts.validation.len() as f64 / n,
            test_ratio: parts.test.len() as f64 / n,
            baseline: late_share(&parts.test),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Invoice;
    use chrono::NaiveDate;

    fn ym(s: &str) -> YearMonth {
        s.parse().unwrap()
    }

    fn row(id: usize, date: NaiveDate, label: Option<PaymentLabel>) -> FeatureRow {
        let inv = Invoice {
            invoice_id: format!("I{id}"),
            customer_id: "C".into(),
            country: None,
            amount: 1.0,
            creation_date: date,
            due_date: date,
            payment_date: None,
        };
        FeatureRow::empty(&inv, label)
    }

    fn monthly_rows(start: &str, end: &str) -> Vec<FeatureRow> {
        ym(start)
            .range_inclusive(ym(end))
            .enumerate()
            .flat_map(|(i, m)| {
                [
                    row(2 * i, m.first_day(), Some(PaymentLabel::Late)),
                    row(2 * i + 1, m.last_day(), Some(PaymentLabel::OnTime)),
                ]
            })
            .collect()
    }

    #[test]
    fn default_split_boundaries() {
        let rows = monthly_rows("2017-08", "2019-06");
        let parts = split(&rows, &SplitSpec::default()).unwrap();
        let max_train = parts.train.iter().map(|r| r.creation_date).max().unwrap();
        let min_val = parts
            .validation
            .iter()
            .map(|r| r.creation_date)
            .min()
            .unwrap();
        let max_val = parts
            .validation
            .iter()
            .map(|r| r.creation_date)
            .max()
            .unwrap();
        let min_test = parts.test.iter().map(|r| r.creation_date).min().unwrap();
        assert_eq!(YearMonth::of(max_train), ym("2018-07"));
        assert_eq!(YearMonth::of(min_val), ym("2018-08"));
        assert!(max_train < min_val && max_val < min_test);
        assert_eq!(parts.len(), rows.len());
    }

    #[test]
    fn overlapping_ranges_rejected() {
        assert!(SplitSpec::new(
            (ym("2018-01"), ym("2018-06")),
            (ym("2018-06"), ym("2018-08")),
            (ym("2018-09"), ym("2018-12"))
        )
        .is_err());
        assert!(SplitSpec::new(
            (ym("2018-01"), ym("2017-06")),
            (ym("2018-07"), ym("2018-08")),
            (ym("2018-09"), ym("2018-12"))
        )
        .is_err());
        let bad = r#"{"train_start":"2018-01","train_end":"2018-06","val_start":"2018-05",
                     "val_end":"2018-08","test_start":"2018-09","test_end":"2018-12"}"#;
        assert!(serde_json::from_str::<SplitSpec>(bad).is_err());
    }

    #[test]
    fn singleton_partitions_and_censored_dropped() {
        let spec = SplitSpec::new(
            (ym("2018-01"), ym("2018-01")),
            (ym("2018-02"), ym("2018-02")),
            (ym("2018-03"), ym("2018-03")),
        )
        .unwrap();
        let d = |s: &str| s.parse::<NaiveDate>().unwrap();
        let rows = vec![
            row(1, d("2018-01-05"), Some(PaymentLabel::Late)),
            row(2, d("2018-02-05"), Some(PaymentLabel::OnTime)),
            row(3, d("2018-03-05"), Some(PaymentLabel::Late)),
            row(4, d("2018-03-06"), None),
            row(5, d("2018-04-01"), Some(PaymentLabel::Late)),
        ];
        let parts = split(&rows, &spec).unwrap();
        assert_eq!(
            (parts.train.len(), parts.validation.len(), parts.test.len()),
            (1, 1, 1)
        );
        let err = split(&rows[..2], &spec).unwrap_err();
        assert!(matches!(err, Error::EmptyPartition("test")));
    }

    #[test]
    fn rolling_snapshots() {
        let specs = make_snapshots(ym("2017-06"), ym("2019-06"), 6, 4, 3, 5).unwrap();
        assert_eq!(specs.len(), 5);
        assert_eq!(specs[0].train(), (ym("2017-06"), ym("2017-11")));
        assert_eq!(specs[0].validation(), (ym("2017-12"), ym("2018-03")));
        assert_eq!(specs[0].test(), (ym("2018-04"), ym("2019-06")));
        assert_eq!(specs[1].train().0, ym("2017-09"));
        assert_eq!(specs[4].train(), (ym("2018-06"), ym("2018-11")));

        let one = make_snapshots(ym("2017-06"), ym("2019-06"), 6, 4, 3, 1).unwrap();
        let direct = SplitSpec::new(
            (ym("2017-06"), ym("2017-11")),
            (ym("2017-12"), ym("2018-03")),
            (ym("2018-04"), ym("2019-06")),
        )
        .unwrap();
        assert_eq!(one, vec![direct]);

        assert!(matches!(
            make_snapshots(ym("2017-06"), ym("2018-06"), 6, 4, 30, 2),
            Err(Error::Horizon(_))
        ));
    }

    #[test]
    fn snapshot_ratios_sum_to_one() {
        let rows = monthly_rows("2017-06", "2019-06");
        for spec in make_snapshots(ym("2017-06"), ym("2019-06"), 6, 4, 3, 5).unwrap() {
            let parts = split(&rows, &spec).unwrap();
            let snap = Snapshot::describe("s", spec, &parts);
            assert!(
                (snap.train_ratio + snap.validation_ratio + snap.test_ratio - 1.0).abs() < 1e-9
            );
            assert_eq!(snap.baseline, 0.5);
        }
    }
}
