use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use arcollect_core::eval::{
    evaluate as evaluate_rows, prepare, snapshot_sweep, window_sweep, write_monthly_csv,
    write_snapshots_csv, write_sweep_csv, Experiment, MetricsReport,
};
use arcollect_core::features::{extract_features, featurize as featurize_rows, write_features_csv};
use arcollect_core::ingest::{parse_csv, write_csv};
use arcollect_core::models::{
    classify_probability, load_model, save_model, TrainedModel, DEFAULT_THRESHOLD,
};
use arcollect_core::rank::build_ranked_list;
use arcollect_core::split::make_snapshots;
use arcollect_core::synth::generate as generate_invoices;
use arcollect_core::{FeatureLayout, GracePolicy, InvoiceDataset, PaymentLabel, YearMonth};
use chrono::NaiveDate;
use serde::Serialize;

use crate::config::RunConfig;
use crate::Failure;

fn experiment(cfg: &RunConfig) -> Experiment {
    Experiment {
        grace: GracePolicy::new(cfg.grace_days),
        layout: FeatureLayout {
            include_ratios: cfg.include_ratios,
        },
        models: cfg.models.clone(),
        seed: cfg.seed,
    }
}

fn load_dataset(cfg: &RunConfig) -> Result<InvoiceDataset, Failure> {
    let path = cfg.input_path();
    let (ds, report) = parse_csv(&path, cfg.strict)
        .with_context(|| format!("cannot load invoices from {}", path.display()))?;
    if report.rejected > 0 {
        eprintln!(
            "skipped {} of {} rows in {}",
            report.rejected,
            report.row_count,
            path.display()
        );
    }
    Ok(ds)
}

fn load_trained(cfg: &RunConfig) -> Result<TrainedModel, Failure> {
    let path = cfg.model_file();
    Ok(load_model(&path).with_context(|| format!("cannot load model {}", path.display()))?)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn wrote(path: &Path) {
    println!("wrote {}", path.display());
}

pub fn generate(cfg: &RunConfig) -> Result<(), Failure> {
    let invoices = generate_invoices(&cfg.generator)?;
    let path = cfg.out.join("invoices.csv");
    write_csv(&path, &invoices)?;
    println!("generated {} invoices", invoices.len());
    wrote(&path);
    Ok(())
}

pub fn featurize(cfg: &RunConfig) -> Result<(), Failure> {
    let ds = load_dataset(cfg)?;
    let exp = experiment(cfg);
    let rows = featurize_rows(&ds, cfg.window_months, exp.grace);
    let path = cfg.out.join("features.csv");
    let mut w = create(&path)?;
    write_features_csv(&mut w, &rows, exp.layout)?;
    w.flush()?;
    wrote(&path);
    Ok(())
}

#[derive(Serialize)]
struct TrainMetrics<'a> {
    model: String,
    window_months: u32,
    n_train: usize,
    n_validation: usize,
    train: &'a MetricsReport,
    validation: &'a MetricsReport,
}

pub fn train(cfg: &RunConfig) -> Result<(), Failure> {
    let ds = load_dataset(cfg)?;
    let exp = experiment(cfg);
    let prepared = prepare(&ds, cfg.window_months, &cfg.split, &exp)?;
    let model = prepared.fit(cfg.model, &exp)?;
    let (train_report, _) = evaluate_rows(&model, &prepared.parts.train)?;
    let (val_report, _) = evaluate_rows(&model, &prepared.parts.validation)?;

    let model_path = cfg.model_file();
    if let Some(dir) = model_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    save_model(&model, &model_path)?;
    wrote(&model_path);
    let metrics_path = cfg.out.join("train_metrics.json");
    write_json(
        &metrics_path,
        &TrainMetrics {
            model: cfg.model.to_string(),
            window_months: cfg.window_months,
            n_train: prepared.parts.train.len(),
            n_validation: prepared.parts.validation.len(),
            train: &train_report,
            validation: &val_report,
        },
    )?;
    wrote(&metrics_path);
    println!(
        "{}: train accuracy {:.4}, validation accuracy {:.4} (baseline {:.4})",
        cfg.model, train_report.accuracy, val_report.accuracy, val_report.baseline
    );
    Ok(())
}

#[derive(Serialize)]
struct EvalMetrics<'a> {
    model: String,
    window_months: u32,
    #[serde(flatten)]
    report: &'a MetricsReport,
}

pub fn evaluate(cfg: &RunConfig) -> Result<(), Failure> {
    let ds = load_dataset(cfg)?;
    let model = load_trained(cfg)?;
    let meta = model.metadata();
    let mut exp = experiment(cfg);
    exp.grace = meta.grace();
    exp.layout = meta.layout();
    let spec = meta.split.unwrap_or(cfg.split);
    let prepared = prepare(&ds, meta.window_months, &spec, &exp)?;
    let (report, roc) = evaluate_rows(&model, &prepared.parts.test)?;

    let metrics_path = cfg.out.join("metrics.json");
    write_json(
        &metrics_path,
        &EvalMetrics {
            model: model.kind().to_string(),
            window_months: meta.window_months,
            report: &report,
        },
    )?;
    wrote(&metrics_path);
    if let Some(roc) = roc {
        let path = cfg.out.join("roc.csv");
        let mut w = create(&path)?;
        roc.write_csv(&mut w)?;
        w.flush()?;
        wrote(&path);
    }
    let monthly_path = cfg.out.join("monthly.csv");
    let mut w = create(&monthly_path)?;
    write_monthly_csv(&mut w, &report.monthly)?;
    w.flush()?;
    wrote(&monthly_path);
    println!(
        "{}: test accuracy {:.4}, f1 {:.4}, auc {}, baseline {:.4}",
        model.kind(),
        report.accuracy,
        report.f1_late,
        report
            .auc
            .map_or_else(|| "undefined".to_string(), |a| format!("{a:.4}")),
        report.baseline
    );
    Ok(())
}

fn default_as_of(cfg: &RunConfig, ds: &InvoiceDataset) -> Result<NaiveDate, Failure> {
    match cfg.as_of.or_else(|| ds.last_creation_date()) {
        Some(d) => Ok(d),
        None => Err(anyhow::anyhow!("the invoice file is empty").into()),
    }
}

pub fn rank(cfg: &RunConfig) -> Result<(), Failure> {
    let ds = load_dataset(cfg)?;
    let model = load_trained(cfg)?;
    let as_of = default_as_of(cfg, &ds)?;
    let meta = model.metadata();
    let list = build_ranked_list(&ds, &model, as_of, meta.window_months, meta.grace())?;

    let path = cfg.out.join("ranking.csv");
    let mut w = create(&path)?;
    list.write_csv(&mut w)?;
    w.flush()?;
    wrote(&path);
    let tau = list.tau_report();
    let tau_path = cfg.out.join("ranking_tau.json");
    write_json(&tau_path, &tau)?;
    wrote(&tau_path);
    println!(
        "ranked {} customers as of {as_of}; tau-b(risk, amount) = {}",
        tau.n_customers,
        tau.tau_b_scores
            .map_or_else(|| "undefined".to_string(), |t| format!("{t:.4}"))
    );
    Ok(())
}

pub fn sweep(cfg: &RunConfig) -> Result<(), Failure> {
    let ds = load_dataset(cfg)?;
    let exp = experiment(cfg);
    let cells = window_sweep(&ds, &cfg.sweep.windows, &cfg.sweep.models, &cfg.split, &exp)?;
    let path = cfg.out.join("sweep.csv");
    let mut w = create(&path)?;
    write_sweep_csv(&mut w, &cells)?;
    w.flush()?;
    wrote(&path);
    Ok(())
}

pub fn snapshots(cfg: &RunConfig) -> Result<(), Failure> {
    let ds = load_dataset(cfg)?;
    let exp = experiment(cfg);
    let s = &cfg.snapshots;
    let (first, last) = match (ds.first_creation_date(), ds.last_creation_date()) {
        (Some(a), Some(b)) => (YearMonth::of(a), YearMonth::of(b)),
        _ => return Err(anyhow::anyhow!("the invoice file is empty").into()),
    };
    let specs = make_snapshots(
        s.start.unwrap_or(first),
        s.end.unwrap_or(last),
        s.train_months,
        s.val_months,
        s.step_months,
        s.count,
    )?;
    let reports = snapshot_sweep(&ds, &specs, cfg.window_months, cfg.model, &exp)?;
    let path = cfg.out.join("snapshots.csv");
    let mut w = create(&path)?;
    write_snapshots_csv(&mut w, &reports)?;
    w.flush()?;
    wrote(&path);
    for (i, r) in reports.iter().enumerate() {
        let path = cfg.out.join(format!("monthly_set{}.csv", i + 1));
        let mut w = create(&path)?;
        write_monthly_csv(&mut w, &r.report.monthly)?;
        w.flush()?;
        wrote(&path);
    }
    Ok(())
}

/// Invoices due in one month, grouped by due date and predicted label.
pub fn plotdata(cfg: &RunConfig) -> Result<(), Failure> {
    let ds = load_dataset(cfg)?;
    let model = load_trained(cfg)?;
    let meta = model.metadata();
    let month = match cfg.plot_month {
        Some(m) => m,
        None => YearMonth::of(default_as_of(cfg, &ds)?),
    };
    let mut cells: BTreeMap<(NaiveDate, PaymentLabel), (usize, f64)> = BTreeMap::new();
    for inv in ds.invoices().iter().filter(|i| month.contains(i.due_date)) {
        let row = extract_features(&ds, inv, meta.window_months, meta.grace());
        let label = classify_probability(model.score_row(&row)?, DEFAULT_THRESHOLD);
        let cell = cells.entry((inv.due_date, label)).or_default();
        cell.0 += 1;
        cell.1 += inv.amount;
    }
    let path = cfg.out.join("plotdata.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["date", "invoice_count", "total_amount", "predicted_label"])?;
    for ((date, label), (count, total)) in &cells {
        w.write_record([
            date.to_string(),
            count.to_string(),
            total.to_string(),
            label.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    wrote(&path);
    Ok(())
}
