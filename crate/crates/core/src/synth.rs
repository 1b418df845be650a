//! Seeded synthetic invoice streams.
//!
//! Every customer carries a latent late-payment propensity drawn from a Beta
//! prior. An invoice created in month `t` (counted from `start_month`) is late
//! with probability `sigmoid(logit(r) + drift_per_month * t + december_bump * [Dec])`,
//! so history is predictive, the population drifts, and December spikes.
//! Payments falling after the last day of `end_month` are not yet observed and
//! are emitted as outstanding.

use chrono::{Datelike, Duration};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::{Beta, Distribution, Geometric, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::domain::{days_in_month, Invoice, YearMonth};
use crate::error::{Error, Result};
use crate::models::sigmoid;

/// Payment terms applied to every generated invoice.
pub const PAYMENT_TERM_DAYS: i64 = 30;
/// Earliest on-time payment, relative to the due date.
pub const EARLY_PAYMENT_DAYS: i64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_customers: usize,
    pub start_month: YearMonth,
    pub end_month: YearMonth,
    pub mean_invoices_per_customer_month: f64,
    pub amount_log_mean: f64,
    pub amount_log_sd: f64,
    pub reliability_alpha: f64,
    pub reliability_beta: f64,
    /// Monthly standard deviation of each customer's own log-odds random walk.
    pub reliability_walk_sd: f64,
    pub drift_per_month: f64,
    pub december_bump: f64,
    pub mean_late_delay_days: f64,
    /// Grace period used to place late and on-time payment dates.
    pub grace_days: u32,
    pub country_weights: Vec<(String, f64)>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        // ~300 customers x 24 months x 3.5 invoices = ~25k invoices.
        Self {
            seed: 42,
            n_customers: 300,
            start_month: YearMonth::new(2017, 7).expect("valid"),
            end_month: YearMonth::new(2019, 6).expect("valid"),
            mean_invoices_per_customer_month: 3.5,
            amount_log_mean: 9.0,
            amount_log_sd: 1.2,
            reliability_alpha: 0.6,
            reliability_beta: 0.4,
            reliability_walk_sd: 1.2,
            drift_per_month: -0.05,
            december_bump: 0.7,
            mean_late_delay_days: 20.0,
            grace_days: 5,
            country_weights: [
                ("BR", 46_262.0),
                ("MX", 53_010.0),
                ("CO", 27_960.0),
                ("PE", 25_884.0),
                ("CL", 21_565.0),
                ("UY", 514.0),
                ("AR", 337.0),
                ("EC", 20.0),
            ]
            .into_iter()
            .map(|(c, w)| (c.to_string(), w))
            .collect(),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_customers == 0 {
            return fail("n_customers must be positive");
        }
        if self.end_month < self.start_month {
            return fail("end_month precedes start_month");
        }
        let positive = [
            (
                "mean_invoices_per_customer_month",
                self.mean_invoices_per_customer_month,
            ),
            ("amount_log_sd", self.amount_log_sd),
            ("reliability_alpha", self.reliability_alpha),
            ("reliability_beta", self.reliability_beta),
            ("mean_late_delay_days", self.mean_late_delay_days),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("amount_log_mean", self.amount_log_mean),
            ("reliability_walk_sd", self.reliability_walk_sd),
            ("drift_per_month", self.drift_per_month),
            ("december_bump", self.december_bump),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite")));
            }
        }
        if self.reliability_walk_sd < 0.0 {
            return fail("reliability_walk_sd must be non-negative");
        }
        if self
            .country_weights
            .iter()
            .any(|(_, w)| !(w.is_finite() && *w >= 0.0))
        {
            return fail("country weights must be finite and non-negative");
        }
        if self.country_weights.iter().map(|(_, w)| w).sum::<f64>() <= 0.0 {
            return fail("country weights must sum to a positive value");
        }
        Ok(())
    }
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-6, 1.0 - 1e-6);
    (p / (1.0 - p)).ln()
}

/// Probability that an invoice created in `month` (`t` months after the start)
/// is paid late, given the customer's current log-odds `propensity`.
pub fn late_probability(cfg: &GeneratorConfig, propensity: f64, t: usize, month: YearMonth) -> f64 {
    let december = if month.month() == 12 {
        cfg.december_bump
    } else {
        0.0
    };
    sigmoid(propensity + cfg.drift_per_month * t as f64 + december)
}

struct Draft {
    customer: usize,
    seq: usize,
    inv: Invoice,
}

/// Generates the invoice stream, sorted by `(creation_date, invoice_id)`.
pub fn generate(cfg: &GeneratorConfig) -> Result<Vec<Invoice>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let prior = Beta::new(cfg.reliability_alpha, cfg.reliability_beta)
        .map_err(|e| Error::Config(format!("reliability prior: {e}")))?;
    let counts = Poisson::new(cfg.mean_invoices_per_customer_month)
        .map_err(|e| Error::Config(format!("invoice rate: {e}")))?;
    let amounts = LogNormal::new(cfg.amount_log_mean, cfg.amount_log_sd)
        .map_err(|e| Error::Config(format!("amount distribution: {e}")))?;
    let delay = Geometric::new(1.0 / (1.0 + cfg.mean_late_delay_days))
        .map_err(|e| Error::Config(format!("late delay: {e}")))?;
    let walk = Normal::new(0.0, cfg.reliability_walk_sd)
        .map_err(|e| Error::Config(format!("reliability walk: {e}")))?;
    let countries = WeightedIndex::new(cfg.country_weights.iter().map(|(_, w)| *w))
        .map_err(|e| Error::Config(format!("country weights: {e}")))?;
    let horizon_end = cfg.end_month.last_day();
    let grace = i64::from(cfg.grace_days);
    let months: Vec<YearMonth> = cfg.start_month.range_inclusive(cfg.end_month).collect();

    let mut drafts = Vec::new();
    for customer in 0..cfg.n_customers {
        let mut propensity = logit(prior.sample(&mut rng));
        let country = cfg.country_weights[countries.sample(&mut rng)].0.clone();
        let mut seq = 0;
        for (t, &month) in months.iter().enumerate() {
            if t > 0 {
                propensity += walk.sample(&mut rng);
            }
            let p_late = late_probability(cfg, propensity, t, month);
            let n = counts.sample(&mut rng) as usize;
            let n_days = days_in_month(month.year(), month.month());
            for _ in 0..n {
                let day = rng.random_range(1..=n_days);
                let creation_date = month.first_day().with_day(day).expect("day within month");
                let due_date = creation_date + Duration::days(PAYMENT_TERM_DAYS);
                let amount = (amounts.sample(&mut rng) * 100.0).round().max(1.0) / 100.0;
                let payment = if rng.random_bool(p_late) {
                    due_date + Duration::days(grace + 1 + delay.sample(&mut rng) as i64)
                } else {
                    due_date + Duration::days(rng.random_range(-EARLY_PAYMENT_DAYS..=grace))
                };
                drafts.push(Draft {
                    customer,
                    seq,
                    inv: Invoice {
                        invoice_id: String::new(),
                        customer_id: format!("C{customer:05}"),
                        country: Some(country.clone()),
                        amount,
                        creation_date,
                        due_date,
                        payment_date: (payment <= horizon_end).then_some(payment),
                    },
                });
                seq += 1;
            }
        }
    }

    drafts.sort_by_key(|d| (d.inv.creation_date, d.customer, d.seq));
    Ok(drafts
        .into_iter()
        .enumerate()
        .map(|(i, mut d)| {
            d.inv.invoice_id = format!("INV{:07}", i + 1);
            d.inv
        })
        .collect())
}
