//! Assembly, matvec and Gagliardo double sums on the default backend.
//!
//! With the `parallel` feature each workload also runs inside a one-thread
//! pool, so a single `cargo bench` compares the rayon path with sequential
//! execution. `cargo bench --no-default-features` gives the plain loop build.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use fracdual::analysis::gagliardo_seminorm;
use fracdual::domain::{build_mask, DomainMask, DomainShape, Grid};
use fracdual::field::GridFunction;
use fracdual::kernel::{KernelSpec, QuadConfig};
use fracdual::operator::assemble;

fn disc_mask(cells: usize) -> DomainMask {
    let shape = DomainShape::unit_ball(2);
    let grid = Grid::for_shape(&shape, cells, 1.0).unwrap();
    build_mask(&grid, &shape).unwrap()
}

fn backends() -> Vec<(&'static str, Option<usize>)> {
    if cfg!(feature = "parallel") {
        vec![("rayon", None), ("one-thread", Some(1))]
    } else {
        vec![("sequential", None)]
    }
}

#[cfg(feature = "parallel")]
fn run<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match threads {
        Some(k) => rayon::ThreadPoolBuilder::new().num_threads(k).build().unwrap().install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run<R: Send>(_threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    f()
}

fn bench_assembly(c: &mut Criterion) {
    let spec = KernelSpec::fractional_laplacian(2, 0.5).unwrap();
    let quad = QuadConfig::default();
    let mut group = c.benchmark_group("assemble");
    group.sample_size(10);
    for cells in [32usize, 64] {
        let mask = disc_mask(cells);
        for (name, threads) in backends() {
            group.bench_with_input(BenchmarkId::new(name, cells), &mask, |b, m| {
                b.iter(|| run(threads, || black_box(assemble(&spec, m, &quad).unwrap())))
            });
        }
    }
    group.finish();
}

fn bench_apply(c: &mut Criterion) {
    let spec = KernelSpec::fractional_laplacian(2, 0.5).unwrap();
    let mut group = c.benchmark_group("apply");
    for cells in [64usize, 128] {
        let op = assemble(&spec, &disc_mask(cells), &QuadConfig::default()).unwrap();
        let u: Vec<f64> = (0..op.unknowns()).map(|k| (k as f64 * 0.37).sin()).collect();
        let mut out = vec![0.0; op.unknowns()];
        for (name, threads) in backends() {
            group.bench_function(BenchmarkId::new(name, cells), |b| {
                b.iter(|| run(threads, || op.apply_into(black_box(&u), &mut out).unwrap()))
            });
        }
    }
    group.finish();
}

fn bench_gagliardo(c: &mut Criterion) {
    let mut group = c.benchmark_group("gagliardo");
    group.sample_size(10);
    for cells in [24usize, 48] {
        let mask = disc_mask(cells);
        let u = GridFunction::from_fn_interior(&mask, |x| 1.0 - x[0] * x[0] - x[1] * x[1]);
        for (name, threads) in backends() {
            group.bench_function(BenchmarkId::new(name, cells), |b| {
                b.iter(|| run(threads, || black_box(gagliardo_seminorm(&u, 0.5, 2.0, mask.interior()).unwrap())))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_assembly, bench_apply, bench_gagliardo);
criterion_main!(benches);
