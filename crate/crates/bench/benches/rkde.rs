use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use rkde_bench::{attention_fixture, contaminated_gram, contaminated_sample};
use rkde_core::{
    gram_matrix, kde_attention, kirwls_fit_gram, residual_quantile, rkde_attention,
    softmax_attention, KernelConfig, KirwlsOptions, RkdeLoss, RkdeOptions, RobustLoss,
};

fn bench_gram(c: &mut Criterion) {
    let xs = contaminated_sample(200, 20, 2, 0);
    let kernel = KernelConfig::normalized(2.0f64.sqrt()).unwrap();
    c.bench_function("gram_matrix 220x2", |b| {
        b.iter(|| gram_matrix(black_box(&xs), &kernel))
    });
}

fn bench_kirwls(c: &mut Criterion) {
    let gram = contaminated_gram(200, 20, 2, 0);
    let a = residual_quantile(&gram, 0.5).unwrap();
    let loss = RobustLoss::huber(a).unwrap();
    let opts = KirwlsOptions::default();
    c.bench_function("kirwls_fit 220 atoms to convergence", |b| {
        b.iter(|| kirwls_fit_gram(black_box(&gram), &loss, &opts).unwrap())
    });
}

fn bench_attention(c: &mut Criterion) {
    let inputs = attention_fixture(64, 16, 0);
    let loss = RkdeLoss::huber_at_quantile(0.5).unwrap();
    let opts = RkdeOptions::default();
    let mut group = c.benchmark_group("attention 64x16");
    group.sample_size(60);
    group.bench_function("softmax", |b| {
        b.iter(|| softmax_attention(black_box(&inputs)).unwrap())
    });
    group.bench_function("kernel ratio", |b| {
        b.iter(|| kde_attention(black_box(&inputs), true).unwrap())
    });
    group.bench_function("robust, 1 step", |b| {
        b.iter(|| rkde_attention(black_box(&inputs), &loss, &opts).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_gram, bench_kirwls, bench_attention);
criterion_main!(benches);
