use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gbcs_bench::{defaults, path, star};
use gbcs_core::controllability::{analyze, Tolerances};
use gbcs_core::linalg::expm;
use gbcs_core::lqgame::{assemble_augmented, riccati_solve};
use gbcs_core::scan::{conjecture_scan, ScanConfig};
use gbcs_core::strategy::{coarsest_sep, strategy_matrix};

fn bench_expm(c: &mut Criterion) {
    let mut group = c.benchmark_group("expm");
    for h in [2, 4, 6] {
        let a = assemble_augmented(&defaults(&path(h))).a_bar;
        group.bench_with_input(BenchmarkId::from_parameter(a.nrows()), &a, |b, a| {
            b.iter(|| expm(black_box(a), 1e-13).unwrap())
        });
    }
    group.finish();
}

fn bench_sep(c: &mut Criterion) {
    let mut group = c.benchmark_group("coarsest_sep");
    for h in [4, 7] {
        let s = strategy_matrix(&star(h));
        group.bench_with_input(BenchmarkId::from_parameter(h), &s, |b, s| {
            b.iter(|| coarsest_sep(black_box(s)))
        });
    }
    group.finish();
}

fn bench_analyze(c: &mut Criterion) {
    let mut group = c.benchmark_group("analyze");
    for h in [2, 4] {
        let top = path(h);
        let p = defaults(&top);
        group.bench_with_input(BenchmarkId::from_parameter(h), &(top, p), |b, (top, p)| {
            b.iter(|| analyze(black_box(top), black_box(p), Tolerances::default()).unwrap())
        });
    }
    group.finish();
}

fn bench_riccati(c: &mut Criterion) {
    let p = defaults(&path(3));
    c.bench_function("riccati/h3_200_steps", |b| {
        b.iter(|| riccati_solve(black_box(&p), 200).unwrap())
    });
}

fn bench_scan(c: &mut Criterion) {
    let mut group = c.benchmark_group("scan");
    group.sample_size(10);
    let mut config = ScanConfig::new(4);
    config.dedup_iso = true;
    group.bench_function("h4_unlabelled", |b| {
        b.iter(|| conjecture_scan(black_box(&config)).unwrap())
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_expm,
    bench_sep,
    bench_analyze,
    bench_riccati,
    bench_scan
);
criterion_main!(benches);
