use std::hint::black_box;

use bimor_bench::{illustrative, small_heat};
use bimor_core::matfun::expm;
use bimor_core::solvers::solve_sylvester;
use criterion::{criterion_group, criterion_main, Criterion};

fn matrix_exponential(c: &mut Criterion) {
    let a7 = illustrative().a.clone();
    let a64 = small_heat(8).a.clone();
    c.bench_function("expm n=7", |b| b.iter(|| expm(black_box(&a7), 0.5).unwrap()));
    c.bench_function("expm n=64", |b| b.iter(|| expm(black_box(&a64), 0.5).unwrap()));
}

fn sylvester(c: &mut Criterion) {
    let a = small_heat(8).a.clone();
    let rhs = small_heat(8).b.clone() * small_heat(8).b.transpose();
    c.bench_function("sylvester n=64", |b| {
        b.iter(|| solve_sylvester(black_box(&a), &a.transpose(), &rhs).unwrap())
    });
}

criterion_group!(benches, matrix_exponential, sylvester);
criterion_main!(benches);
