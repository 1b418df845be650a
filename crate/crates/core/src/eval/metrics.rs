use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{PaymentLabel, YearMonth};
use crate::error::{Error, Result};
use crate::features::FeatureRow;
use crate::models::{classify_probability, TrainedModel, DEFAULT_THRESHOLD};

/// Confusion counts with Late as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn from_labels(labels: &[PaymentLabel], predictions: &[PaymentLabel]) -> Result<Self> {
        if labels.len() != predictions.len() {
            return Err(Error::Metric(format!(
                "{} labels but {} predictions",
                labels.len(),
                predictions.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::Metric("no rows to evaluate".into()));
        }
        let mut c = Self::default();
        for (y, p) in labels.iter().zip(predictions) {
            match (y.is_late(), p.is_late()) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn n(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.n() as f64
    }

    /// `2tp / (2tp + fp + fn)`, or 0 when nothing is late on either side.
    pub fn f1_late(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            (2 * self.tp) as f64 / denom as f64
        }
    }
}

/// Share of the majority class.
pub fn majority_baseline(labels: &[PaymentLabel]) -> f64 {
    let late = late_share(labels);
    late.max(1.0 - late)
}

pub fn late_share(labels: &[PaymentLabel]) -> f64 {
    labels.iter().filter(|l| l.is_late()).count() as f64 / labels.len() as f64
}

/// ROC vertices from `(0, 0)` to `(1, 1)`, one per distinct score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
}

impl RocCurve {
    /// Trapezoidal area under the curve.
    pub fn area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
            .sum()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["fpr", "tpr"])?;
        for (fpr, tpr) in &self.points {
            w.write_record([fpr.to_string(), tpr.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn class_counts(labels: &[bool]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 {
        return Err(Error::UndefinedAuc("no late rows"));
    }
    if neg == 0 {
        return Err(Error::UndefinedAuc("no on-time rows"));
    }
    Ok((pos, neg))
}

fn check_scores(labels: &[bool], scores: &[f64]) -> Result<()> {
    if labels.len() != scores.len() {
        return Err(Error::Metric("labels and scores differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Metric("NaN score".into()));
    }
    Ok(())
}

/// Mann-Whitney AUC with average ranks for tied scores; `labels[i]` is true
/// for late rows.
pub fn auc(labels: &[bool], scores: &[f64]) -> Result<f64> {
    check_scores(labels, scores)?;
    let (pos, neg) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean
        let avg = (i + j + 2) as f64 / 2.0;
        let late_in_group = order[i..=j].iter().filter(|&&k| labels[k]).count();
        rank_sum += avg * late_in_group as f64;
        i = j + 1;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

pub fn roc_and_auc(labels: &[bool], scores: &[f64]) -> Result<(RocCurve, f64)> {
    check_scores(labels, scores)?;
    let (pos, neg) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok((RocCurve { points }, auc(labels, scores)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyAccuracy {
    pub month: YearMonth,
    pub n: usize,
    pub accuracy: f64,
    /// Majority-class share within the month.
    pub baseline: f64,
}

pub fn monthly_accuracy(
    labels: &[PaymentLabel],
    predictions: &[PaymentLabel],
    creation_dates: &[NaiveDate],
) -> Result<Vec<MonthlyAccuracy>> {
    if labels.len() != predictions.len() || labels.len() != creation_dates.len() {
        return Err(Error::Metric("monthly inputs differ in length".into()));
    }
    let mut by_month: BTreeMap<YearMonth, (Vec<PaymentLabel>, Vec<PaymentLabel>)> = BTreeMap::new();
    for ((y, p), d) in labels.iter().zip(predictions).zip(creation_dates) {
        let e = by_month.entry(YearMonth::of(*d)).or_default();
        e.0.push(*y);
        e.1.push(*p);
    }
    by_month
        .into_iter()
        .map(|(month, (y, p))| {
            Ok(MonthlyAccuracy {
                month,
                n: y.len(),
                accuracy: Confusion::from_labels(&y, &p)?.accuracy(),
                baseline: majority_baseline(&y),
            })
        })
        .collect()
}

pub fn write_monthly_csv<W: Write>(writer: W, months: &[MonthlyAccuracy]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["month", "n", "accuracy", "baseline"])?;
    for m in months {
        w.write_record([
            m.month.to_string(),
            m.n.to_string(),
            m.accuracy.to_string(),
            m.baseline.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub accuracy: f64,
    pub f1_late: f64,
    /// Majority-class share.
    pub baseline: f64,
    pub late_share: f64,
    pub confusion: Confusion,
    /// `None` when the evaluated rows hold a single class.
    pub auc: Option<f64>,
    pub monthly: Vec<MonthlyAccuracy>,
}

/// Scores every row at the default threshold. Rows must be labeled.
pub fn evaluate(
    model: &TrainedModel,
    rows: &[FeatureRow],
) -> Result<(MetricsReport, Option<RocCurve>)> {
    let labels = rows
        .iter()
        .map(|r| r.label.ok_or_else(|| Error::Censored(r.invoice_id.clone())))
        .collect::<Result<Vec<_>>>()?;
    let scores = rows
        .par_iter()
        .map(|r| model.score_row(r))
        .collect::<Result<Vec<_>>>()?;
    let dates: Vec<NaiveDate> = rows.iter().map(|r| r.creation_date).collect();
    report_from_scores(&labels, &scores, &dates)
}

pub fn report_from_scores(
    labels: &[PaymentLabel],
    scores: &[f64],
    creation_dates: &[NaiveDate],
) -> Result<(MetricsReport, Option<RocCurve>)> {
    let predictions: Vec<PaymentLabel> = scores
        .iter()
        .map(|&p| classify_probability(p, DEFAULT_THRESHOLD))
        .collect();
    let confusion = Confusion::from_labels(labels, &predictions)?;
    let late: Vec<bool> = labels.iter().map(|l| l.is_late()).collect();
    let roc = match roc_and_auc(&late, scores) {
        Ok(r) => Some(r),
        Err(Error::UndefinedAuc(_)) => None,
        Err(e) => return Err(e),
    };
    let report = MetricsReport {
        n: labels.len(),
        accuracy: confusion.accuracy(),
        f1_late: confusion.f1_late(),
        baseline: majority_baseline(labels),
        late_share: late_share(labels),
        confusion,
        auc: roc.as_ref().map(|r| r.1),
        monthly: monthly_accuracy(labels, &predictions, creation_dates)?,
    };
    Ok((report, roc.map(|r| r.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use PaymentLabel::{Late as L, OnTime as O};

    #[test]
    fn confusion_counts() {
        let c = Confusion::from_labels(&[L, L, O, O], &[L, O, O, O]).unwrap();
        assert_eq!(
            c,
            Confusion {
                tp: 1,
                fp: 0,
                tn: 2,
                fn_: 1
            }
        );
        assert_eq!(c.accuracy(), 0.75);
        assert!((c.f1_late() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(Confusion::from_labels(&[O], &[O]).unwrap().f1_late(), 0.0);
        assert!(Confusion::from_labels(&[], &[]).is_err());
        assert!(Confusion::from_labels(&[L], &[]).is_err());
    }

    #[test]
    fn always_late_matches_baseline() {
        // 6170 of 10000 late
        let labels: Vec<_> = (0..10_000).map(|i| if i < 6170 { L } else { O }).collect();
        let c = Confusion::from_labels(&labels, &vec![L; labels.len()]).unwrap();
        assert_eq!(c.accuracy(), 0.6170);
        assert_eq!(majority_baseline(&labels), 0.6170);
    }

    #[test]
    fn auc_examples() {
        let y = [true, true, false, false];
        assert_eq!(auc(&y, &[0.9, 0.45, 0.4, 0.5]).unwrap(), 0.75);
        assert_eq!(auc(&y, &[0.3; 4]).unwrap(), 0.5);
        assert_eq!(auc(&y, &[0.9, 0.8, 0.1, 0.2]).unwrap(), 1.0);
        assert!(matches!(
            auc(&[true, true], &[0.1, 0.2]),
            Err(Error::UndefinedAuc(_))
        ));
    }

    #[test]
    fn roc_shape() {
        let y = [true, false, true, false, true];
        let s = [0.9, 0.9, 0.5, 0.2, 0.2];
        let (roc, a) = roc_and_auc(&y, &s).unwrap();
        assert_eq!(roc.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(roc.points.last(), Some(&(1.0, 1.0)));
        assert_eq!(roc.points.len(), 4);
        assert!((roc.area() - a).abs() < 1e-12);
    }

    #[test]
    fn monthly_series() {
        let d = |m| NaiveDate::from_ymd_opt(2018, m, 3).unwrap();
        let out =
            monthly_accuracy(&[L, O, L, L], &[L, O, L, O], &[d(1), d(1), d(2), d(2)]).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!((out[0].accuracy, out[1].accuracy), (1.0, 0.5));
        let all_late = monthly_accuracy(&[L, L], &[L, L], &[d(5), d(5)]).unwrap();
        assert_eq!((all_late[0].accuracy, all_late[0].baseline), (1.0, 1.0));
    }
}
