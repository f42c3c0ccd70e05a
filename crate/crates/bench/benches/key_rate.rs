use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use pnqkd::classical::{classical_objective, ClassicalClamp, ClassicalModel};
use pnqkd::measurements::charlie_povm;
use pnqkd::noisy::{realistic_charlie_povm, realistic_key_rate_with, EveAttribution, HeraldingRule};
use pnqkd::optimize::{optimize_coefficients, OptimizerConfig};
use pnqkd::protocol::key_rate;
use pnqkd::{ChannelParams, CoefficientVector, DetectorParams};

fn ideal_key_rate(c: &mut Criterion) {
    let ch = ChannelParams::from_distance(100.0).unwrap();
    let mut group = c.benchmark_group("key_rate");
    for n_max in [1, 3, 5, 7] {
        let a = CoefficientVector::squeezed(0.5, n_max).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n_max), &a, |b, a| {
            b.iter(|| key_rate(black_box(a), a, &ch).unwrap().total_key_rate)
        });
    }
    group.finish();
}

fn relay_povms(c: &mut Criterion) {
    c.bench_function("charlie_povm n_max=7", |b| b.iter(|| charlie_povm(black_box(7)).unwrap()));
    let det = DetectorParams::new(0.85, 5e-8).unwrap();
    c.bench_function("realistic_charlie_povm", |b| b.iter(|| realistic_charlie_povm(black_box(&det)).unwrap()));
}

fn realistic_key_rate(c: &mut Criterion) {
    let det = DetectorParams::new(0.85, 5e-8).unwrap();
    let povm = realistic_charlie_povm(&det).unwrap();
    let a = CoefficientVector::new(vec![0.85, 0.15]).unwrap();
    let ch = ChannelParams::from_distance(300.0).unwrap();
    let rule = HeraldingRule::default();
    c.bench_function("realistic_key_rate", |b| {
        b.iter(|| realistic_key_rate_with(black_box(&a), &a, &ch, &povm, &rule, EveAttribution::FullPurification).unwrap())
    });
}

fn optimizer(c: &mut Criterion) {
    let ch = ChannelParams::from_distance(50.0).unwrap();
    let model = ClassicalModel::from_channel(CoefficientVector::uniform(7), CoefficientVector::uniform(7), &ch).unwrap();
    c.bench_function("classical_objective n_max=7", |b| {
        b.iter(|| classical_objective(black_box(&model), ClassicalClamp::PerOutcome))
    });
    let mut group = c.benchmark_group("optimize_coefficients");
    group.sample_size(10);
    for n_max in [1, 7] {
        group.bench_with_input(BenchmarkId::from_parameter(n_max), &n_max, |b, &n| {
            b.iter(|| optimize_coefficients(n, &ch, None, None, &OptimizerConfig::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, ideal_key_rate, relay_povms, realistic_key_rate, optimizer);
criterion_main!(benches);
