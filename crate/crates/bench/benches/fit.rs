use criterion::{criterion_group, criterion_main, Criterion};
use editbench_bench::dense_problem;
use editbench_core::alignment::{fit_weights, FitOptions};

fn options(step: f64, coarse_to_fine: bool) -> FitOptions {
    FitOptions {
        step,
        coarse_to_fine,
        ..FitOptions::default()
    }
}

fn grid_search(c: &mut Criterion) {
    let mut g = c.benchmark_group("fit_weights");
    g.sample_size(10);
    let p3 = dense_problem(3, 9, 400, 5);
    g.bench_function("dim3_step0.01", |b| b.iter(|| fit_weights(&p3, &options(0.01, false))));
    let p5 = dense_problem(5, 9, 400, 6);
    g.bench_function("dim5_step0.05", |b| b.iter(|| fit_weights(&p5, &options(0.05, false))));
    g.bench_function("dim5_step0.01_coarse_to_fine", |b| {
        b.iter(|| fit_weights(&p5, &options(0.01, true)))
    });
    g.finish();
}

criterion_group!(benches, grid_search);
criterion_main!(benches);
