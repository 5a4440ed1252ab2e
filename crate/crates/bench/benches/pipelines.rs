use criterion::{black_box, criterion_group, criterion_main, Criterion};
use thermops_bench::qubit_ensemble;
use thermops_core::{contour_grid, run_ensemble, Alpha, EnergySpec};

fn ensemble(c: &mut Criterion) {
    let mut group = c.benchmark_group("ensemble");
    group.sample_size(10);
    let small = qubit_ensemble(100, 300);
    group.bench_function("qubit_100x300", |b| b.iter(|| run_ensemble(black_box(&small)).unwrap()));
    let full = qubit_ensemble(1000, 300);
    group.bench_function("qubit_1000x300", |b| b.iter(|| run_ensemble(black_box(&full)).unwrap()));
    group.finish();
}

fn contour(c: &mut Criterion) {
    let mut group = c.benchmark_group("contour");
    group.sample_size(10);
    let spec = EnergySpec::new(3, 2.0, 0.75).unwrap();
    let alphas = [Alpha::Finite(0.5), Alpha::ONE, Alpha::Finite(2.0), Alpha::Infinity];
    group.bench_function("resolution_200", |b| {
        b.iter(|| contour_grid(black_box(&spec), &alphas, 200).unwrap())
    });
    group.finish();
}

criterion_group!(benches, ensemble, contour);
criterion_main!(benches);
