use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use khessian_bench::{forced_case, green_input, homoclinic_case};
use khessian_core::branch::{newton_solve, DEFAULT_T};
use khessian_core::greens::green_apply;
use khessian_core::integrate::integrate;
use khessian_core::phaseplane::{equilibria, trace_manifold, ManifoldBranch};
use khessian_core::shoot;
use khessian_core::BoundaryKind;

fn integrator(c: &mut Criterion) {
    let spec = homoclinic_case();
    let field = spec.field();
    let mut group = c.benchmark_group("integrate");
    for tol in [1e-6, 1e-10] {
        group.bench_with_input(BenchmarkId::new("orbit_t30", tol), &tol, |b, &tol| {
            b.iter(|| integrate(|t, x| field.rate(t, x), black_box([2.0, 0.3]), 0.0, 30.0, tol, &[]).unwrap())
        });
    }
    let origin = equilibria(&spec).unwrap().remove(0);
    group.bench_function("homoclinic_trace", |b| {
        b.iter(|| trace_manifold(&origin, ManifoldBranch::StableRight, &spec, 30.0).unwrap())
    });
    group.finish();
}

fn scan(c: &mut Criterion) {
    let spec = forced_case(0.0).with_lambda(0.0);
    let mut group = c.benchmark_group("shoot");
    group.sample_size(10);
    group.bench_function("scan_201", |b| b.iter(|| shoot::scan(&spec, 25.0, (-10.0, 10.0), 201, 1e-8).unwrap()));
    let forced = forced_case(0.01);
    group.bench_function("solve_201", |b| b.iter(|| shoot::solve(&forced, 25.0, (-1.0, 1.0), 201).unwrap()));
    group.finish();
}

fn greens(c: &mut Criterion) {
    let mut group = c.benchmark_group("green_apply");
    for boundary in [BoundaryKind::Dirichlet, BoundaryKind::Entire] {
        let (kernel, t, f) = green_input(boundary);
        group.bench_function(boundary.name(), |b| b.iter(|| green_apply(black_box(&f), &t, &kernel).unwrap()));
    }
    group.finish();
}

fn newton(c: &mut Criterion) {
    let spec = forced_case(0.0);
    let mut group = c.benchmark_group("newton");
    group.sample_size(20);
    for nodes in [1001usize, 4001] {
        let guess = vec![0.0; nodes];
        group.bench_with_input(BenchmarkId::new("lambda_0.01", nodes), &guess, |b, guess| {
            b.iter(|| newton_solve(&spec, 0.01, guess, DEFAULT_T).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, integrator, scan, greens, newton);
criterion_main!(benches);
