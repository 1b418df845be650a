use std::hint::black_box;

use arcollect_core::eval::{auc, prepare, Experiment};
use arcollect_core::features::featurize;
use arcollect_core::models::gbt::GradientBoosting;
use arcollect_core::models::GbtConfig;
use arcollect_core::rank::kendall_tau_b;
use arcollect_core::synth::generate;
use arcollect_core::{GeneratorConfig, GracePolicy, InvoiceDataset, SplitSpec};
use criterion::{criterion_group, criterion_main, Criterion};

fn dataset(n_customers: usize) -> InvoiceDataset {
    let cfg = GeneratorConfig {
        n_customers,
        ..Default::default()
    };
    InvoiceDataset::new(generate(&cfg).unwrap()).unwrap()
}

fn features(c: &mut Criterion) {
    let ds = dataset(100);
    let mut group = c.benchmark_group("featurize");
    for w in [3, 12] {
        group.bench_function(format!("w{w}"), |b| {
            b.iter(|| featurize(black_box(&ds), w, GracePolicy::default()))
        });
    }
    group.finish();
}

fn boosting(c: &mut Criterion) {
    let ds = dataset(100);
    let prepared = prepare(&ds, 3, &SplitSpec::default(), &Experiment::default()).unwrap();
    let data = prepared.training_set(Default::default()).unwrap();
    let cfg = GbtConfig {
        n_trees: 50,
        ..Default::default()
    };
    c.bench_function("gbt_fit_50_rounds", |b| {
        b.iter(|| GradientBoosting::fit(black_box(&data), &cfg).unwrap())
    });
}

fn ranking_metrics(c: &mut Criterion) {
    let n = 20_000;
    // cheap deterministic pseudo-random scores
    let scores: Vec<f64> = (0..n)
        .map(|i| ((i * 7919) % 10_007) as f64 / 10_007.0)
        .collect();
    let labels: Vec<bool> = (0..n).map(|i| (i * 31) % 7 < 3).collect();
    let other: Vec<f64> = (0..n).map(|i| ((i * 104_729) % 9_973) as f64).collect();
    c.bench_function("auc_20k", |b| {
        b.iter(|| auc(black_box(&labels), black_box(&scores)).unwrap())
    });
    c.bench_function("kendall_tau_b_20k", |b| {
        b.iter(|| kendall_tau_b(black_box(&scores), black_box(&other)).unwrap())
    });
}

criterion_group!(benches, features, boosting, ranking_metrics);
criterion_main!(benches);
