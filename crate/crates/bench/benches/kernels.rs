use criterion::{criterion_group, criterion_main, Criterion};
use editbench_bench::{gaussian, paired, scene};
use editbench_core::alignment::{kendall, pearson, spearman};
use editbench_core::backends::frechet_distance;
use editbench_core::metrics::{degrade, edge_map};
use std::hint::black_box;

fn correlations(c: &mut Criterion) {
    let (x, y) = paired(1000, 1);
    c.bench_function("pearson_1000", |b| b.iter(|| pearson(black_box(&x), black_box(&y))));
    c.bench_function("spearman_1000", |b| b.iter(|| spearman(black_box(&x), black_box(&y))));
    c.bench_function("kendall_1000", |b| b.iter(|| kendall(black_box(&x), black_box(&y))));
}

fn frechet(c: &mut Criterion) {
    let (m1, c1) = gaussian(64, 2);
    let (m2, c2) = gaussian(64, 3);
    c.bench_function("frechet_64", |b| b.iter(|| frechet_distance(&m1, &c1, &m2, &c2)));
}

fn image_ops(c: &mut Criterion) {
    let img = scene(256, 256, 4);
    c.bench_function("canny_256", |b| b.iter(|| edge_map(black_box(&img))));
    c.bench_function("degrade_256", |b| b.iter(|| degrade(black_box(&img))));
}

criterion_group!(benches, correlations, frechet, image_ops);
criterion_main!(benches);
