use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use floquet_bench::ising_chain;
use floquet_core::{fit_trajectory, monodromy, simulate, FitOptions, ObservableSet, TimeGrid};
use ndarray::Array2;
use num_complex::Complex64;

fn pauli_apply(c: &mut Criterion) {
    let mut group = c.benchmark_group("pauli_apply_block");
    for n in [4usize, 6, 8] {
        let inst = ising_chain(n, 1, 1);
        let h = inst.spec.pauli_sum_at(0.1);
        let dim = 1 << n;
        let input = Array2::<Complex64>::eye(dim);
        let mut out = Array2::<Complex64>::zeros((dim, dim));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| h.apply_block(black_box(input.view()), &mut out))
        });
    }
    group.finish();
}

fn monodromy_bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("monodromy");
    group.sample_size(10);
    for n in [4usize, 6] {
        let inst = ising_chain(n, 1, 2);
        let grid = TimeGrid::new(256);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| monodromy(black_box(&inst.spec), &grid).unwrap())
        });
    }
    group.finish();
}

fn assemble_and_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_trajectory");
    for m in [1usize, 3] {
        let inst = ising_chain(5, m, 3);
        let sim = simulate(&inst.spec, &TimeGrid::new(128), None).unwrap();
        let basis = inst.spec.basis().clone();
        let opts = FitOptions {
            cutoff: m,
            stacking: 1,
            observables: ObservableSet::basis_copy(&basis),
            noise: None,
        };
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |b, _| {
            b.iter(|| fit_trajectory(black_box(&sim.trajectory), &basis, &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, pauli_apply, monodromy_bench, assemble_and_solve);
criterion_main!(benches);
