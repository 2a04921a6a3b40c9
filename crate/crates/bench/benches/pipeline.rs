use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};

use lobpred_core::book_engine::replay_validate;
use lobpred_core::features::{arrival_rate_features, build, ArrivalVariant};
use lobpred_core::labeling::smoothed_labels;
use lobpred_core::lobster_io::{
    parse_message_file, parse_orderbook_file, write_messages, write_orderbook, ParseOptions,
};
use lobpred_core::models::{ModelKind, ModelSpec};
use lobpred_core::resampling::smote_resample;
use lobpred_core::synth::{generate, SynthConfig};
use lobpred_core::{EventBookSeries, LabelParams, LabeledDataset, Provenance, ValidationMode};

const ROWS: usize = 20_000;

fn series() -> EventBookSeries {
    generate(&SynthConfig {
        rows: ROWS,
        seed: 1,
        ..SynthConfig::default()
    })
}

fn dataset(s: &EventBookSeries) -> LabeledDataset {
    let labels = smoothed_labels(&s.mid_quotes().unwrap(), &LabelParams::smoothed(20, 1.0)).unwrap();
    let feats = build(s, &"Orders-All+LOB-10".parse().unwrap(), Default::default()).unwrap();
    LabeledDataset::join(&feats, &labels, Provenance::Smoothed).unwrap()
}

fn parsing(c: &mut Criterion) {
    let s = series();
    let mut messages = Vec::new();
    let mut books = Vec::new();
    write_messages(&s.events, &mut messages).unwrap();
    write_orderbook(&s.books, &mut books).unwrap();
    let mut g = c.benchmark_group("parse");
    g.throughput(Throughput::Elements(ROWS as u64));
    g.bench_function("messages", |b| {
        b.iter(|| parse_message_file(black_box(&messages[..]), ParseOptions::default()).unwrap())
    });
    g.bench_function("orderbook", |b| {
        b.iter(|| parse_orderbook_file(black_box(&books[..]), 10, ValidationMode::Strict).unwrap())
    });
    g.finish();
}

fn replay(c: &mut Criterion) {
    let s = series();
    let mut g = c.benchmark_group("replay");
    g.throughput(Throughput::Elements(ROWS as u64));
    g.bench_function("validate", |b| b.iter(|| replay_validate(black_box(&s))));
    g.finish();
}

fn arrival(c: &mut Criterion) {
    let s = series();
    let mut g = c.benchmark_group("arrival");
    g.throughput(Throughput::Elements(ROWS as u64));
    for window in [0.1, 10.0] {
        g.bench_function(format!("all@{window}"), |b| {
            b.iter(|| arrival_rate_features(black_box(&s), window, ArrivalVariant::All).unwrap())
        });
    }
    g.finish();
}

fn models(c: &mut Criterion) {
    let d = dataset(&series()).subset(&(0..5_000).collect::<Vec<_>>());
    let mut g = c.benchmark_group("models");
    g.sample_size(10);
    let rf = ModelSpec::parse(ModelKind::Rf, "n_estimators=10").unwrap();
    g.bench_function("rf_fit_10_trees", |b| b.iter(|| rf.fit(d.x.view(), &d.y, 0).unwrap()));
    let gnb = ModelSpec::parse(ModelKind::Gnb, "").unwrap();
    g.bench_function("gnb_fit", |b| b.iter(|| gnb.fit(d.x.view(), &d.y, 0).unwrap()));
    g.bench_function("smote", |b| {
        b.iter_batched(|| d.clone(), |d| smote_resample(&d, 5, 0).unwrap(), BatchSize::LargeInput)
    });
    g.finish();
}

criterion_group!(benches, parsing, replay, arrival, models);
criterion_main!(benches);
