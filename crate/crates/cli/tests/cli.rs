use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"{
  "seed": 7,
  "generator": { "n_customers": 40 },
  "models": {
    "random_forest": { "n_trees": 15 },
    "gbt": { "n_trees": 20 }
  },
  "sweep": { "windows": [2, 3], "models": ["naive_bayes", "gbt", "ensemble"] }
}"#;

fn arcollect(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arcollect"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = arcollect(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

fn run_pipeline(dir: &Path) -> PathBuf {
    let cfg = write_config(dir, SMALL);
    let out = dir.join("out");
    let (cfg, out) = (cfg.to_str().unwrap(), out.to_str().unwrap());
    for cmd in [
        "generate",
        "featurize",
        "train",
        "evaluate",
        "rank",
        "sweep",
        "snapshots",
        "plotdata",
    ] {
        ok(&[cmd, "--config", cfg, "--out", out]);
    }
    PathBuf::from(out)
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn pipeline_produces_every_artifact_and_is_reproducible() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let out_a = run_pipeline(a.path());
    let out_b = run_pipeline(b.path());

    let files_a = artifacts(&out_a);
    let names: Vec<&str> = files_a.iter().map(|(n, _)| n.as_str()).collect();
    for expected in [
        "invoices.csv",
        "features.csv",
        "model.json",
        "train_metrics.json",
        "metrics.json",
        "roc.csv",
        "monthly.csv",
        "ranking.csv",
        "ranking_tau.json",
        "sweep.csv",
        "snapshots.csv",
        "monthly_set1.csv",
        "monthly_set5.csv",
        "plotdata.csv",
    ] {
        assert!(names.contains(&expected), "missing {expected} in {names:?}");
    }
    assert_eq!(files_a, artifacts(&out_b));

    let metrics: serde_json::Value =
        serde_json::from_slice(&fs::read(out_a.join("metrics.json")).unwrap()).unwrap();
    for key in ["accuracy", "baseline", "f1_late", "auc", "monthly"] {
        assert!(metrics.get(key).is_some(), "metrics.json lacks {key}");
    }

    let sweep = fs::read_to_string(out_a.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 2 * 3);
    let snapshots = fs::read_to_string(out_a.join("snapshots.csv")).unwrap();
    assert_eq!(snapshots.lines().count(), 1 + 5);
    let ranking = fs::read_to_string(out_a.join("ranking.csv")).unwrap();
    assert_eq!(
        ranking.lines().next(),
        Some("customer_id,risk_score,total_open_amount,n_open_invoices,risk_rank,greedy_rank")
    );
}

#[test]
fn sweep_over_eleven_windows() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{ "generator": { "n_customers": 25 }, "sweep": { "models": ["naive_bayes", "logistic_regression"] } }"#,
    );
    let out = dir.path().join("out");
    let (cfg, out_s) = (cfg.to_str().unwrap(), out.to_str().unwrap());
    ok(&["generate", "--config", cfg, "--out", out_s]);
    ok(&["sweep", "--config", cfg, "--out", out_s]);
    let sweep = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = sweep.lines().skip(1).collect();
    assert_eq!(rows.len(), 11 * 2);
    assert!(rows[0].starts_with("2,naive_bayes,"));
    assert!(rows[21].starts_with("12,logistic_regression,"));
}

#[test]
fn flags_override_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{ "seed": 1, "generator": { "n_customers": 5 } }"#,
    );
    let cfg = cfg.to_str().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["generate", "--config", cfg, "--out", a.to_str().unwrap()]);
    ok(&[
        "generate",
        "--config",
        cfg,
        "--out",
        b.to_str().unwrap(),
        "--seed",
        "2",
    ]);
    assert_ne!(
        fs::read(a.join("invoices.csv")).unwrap(),
        fs::read(b.join("invoices.csv")).unwrap()
    );
}

#[test]
fn usage_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let unknown_key = write_config(dir.path(), r#"{ "windw_months": 3 }"#);
    let res = arcollect(&[
        "generate",
        "--config",
        unknown_key.to_str().unwrap(),
        "--out",
        out,
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("windw_months"));

    assert_eq!(
        arcollect(&["generate", "--config", "/nonexistent/cfg.json"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        arcollect(&["train", "--window", "0", "--out", out])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        arcollect(&["train", "--model", "svm", "--out", out])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(arcollect(&["frobnicate"]).status.code(), Some(2));

    let bad_generator = write_config(dir.path(), r#"{ "generator": { "n_customers": 0 } }"#);
    let res = arcollect(&[
        "generate",
        "--config",
        bad_generator.to_str().unwrap(),
        "--out",
        out,
    ]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn data_errors_exit_1() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();

    let res = arcollect(&["featurize", "--out", out_s]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("invoices.csv"));

    fs::create_dir_all(&out).unwrap();
    fs::write(out.join("model.json"), "{\"schema_version\": 99}").unwrap();
    fs::write(
        out.join("invoices.csv"),
        "invoice_id,customer_id,country,amount,creation_date,due_date,payment_date\n\
         I1,C1,BR,10.0,2018-01-01,2018-01-31,2018-02-01\n",
    )
    .unwrap();
    let res = arcollect(&["evaluate", "--out", out_s]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("schema_version"));

    // a single invoice cannot fill three partitions
    let res = arcollect(&["train", "--out", out_s]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("partition"));
}
