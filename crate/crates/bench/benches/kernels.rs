use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use llb_bench::{curved, flat};
use llb_core::solver::solve_implicit;
use llb_core::{laplacian_section, rhs, step_rk4, Field};

fn laplacian(c: &mut Criterion) {
    let mut group = c.benchmark_group("laplacian_section");
    for n in [32, 64, 128] {
        let f = flat(n);
        group.bench_with_input(BenchmarkId::new("flat", n), &f, |b, f| {
            b.iter(|| laplacian_section(&f.v0, &f.grid, &f.conn).unwrap())
        });
        let f = curved(n);
        group.bench_with_input(BenchmarkId::new("curved", n), &f, |b, f| {
            b.iter(|| laplacian_section(&f.v0, &f.grid, &f.conn).unwrap())
        });
    }
    group.finish();
}

fn stepping(c: &mut Criterion) {
    let f = flat(64);
    c.bench_function("rhs/flat/64", |b| {
        b.iter(|| rhs(&f.v0, &f.grid, &f.conn, f.cfg.lambda, f.cfg.mu).unwrap())
    });
    c.bench_function("step_rk4/flat/64", |b| {
        b.iter(|| step_rk4(&f.v0, f.cfg.dt, &f.grid, &f.conn, &f.cfg).unwrap())
    });
    c.bench_function("cg_solve/flat/64", |b| {
        b.iter(|| solve_implicit(&f.v0, &f.v0, 0.1, &f.grid, &f.conn, 1e-10, 10_000).unwrap())
    });
}

fn reduction(c: &mut Criterion) {
    let f = flat(256);
    let values = f.v0.values();
    c.bench_function("par_sum/256x256", |b| {
        b.iter(|| llb_core::par::sum_by(values.len(), |i| values[i][0] * values[i][0]))
    });
}

criterion_group!(benches, laplacian, stepping, reduction);
criterion_main!(benches);
