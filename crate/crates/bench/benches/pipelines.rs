use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use rnorm_bench::{gaussian_grid, planted_problem};
use rnorm_core::{
    frac_laplacian_2d, grid_radon_2d, min_norm_fit, parallelogram_check, rnorm_grid_2d, rnorm_radial_odd,
    RadialFunction,
};

fn radial(c: &mut Criterion) {
    let d3 = RadialFunction::bump_power(3, 2).unwrap();
    let d9 = RadialFunction::bump_power(9, 7).unwrap();
    c.bench_function("radial d=3 k=2", |b| b.iter(|| rnorm_radial_odd(black_box(&d3)).unwrap()));
    c.bench_function("radial d=9 k=7", |b| b.iter(|| rnorm_radial_odd(black_box(&d9)).unwrap()));
    c.bench_function("parallelogram", |b| b.iter(|| parallelogram_check(black_box([1.0, 0.0]), [0.0, 1.0]).unwrap()));
}

fn grid(c: &mut Criterion) {
    let mut g = c.benchmark_group("grid");
    g.sample_size(10);
    let f = gaussian_grid(256);
    g.bench_function("radon 256² K=128 J=257", |b| b.iter(|| grid_radon_2d(black_box(&f), 128, 257).unwrap()));
    g.bench_function("fractional laplacian 256²", |b| b.iter(|| frac_laplacian_2d(black_box(&f), 3.0).unwrap()));
    g.bench_function("rnorm 256² K=128 J=257", |b| b.iter(|| rnorm_grid_2d(black_box(&f), 128, 257).unwrap()));
    g.finish();
}

fn fit(c: &mut Criterion) {
    let mut g = c.benchmark_group("fit");
    g.sample_size(10);
    let p = planted_problem(100, 32);
    g.bench_function("planted 100 samples K=32", |b| b.iter(|| min_norm_fit(black_box(&p)).unwrap()));
    g.finish();
}

criterion_group!(benches, radial, grid, fit);
criterion_main!(benches);
