use criterion::{black_box, criterion_group, criterion_main, Criterion};
use milne::ermakov::{self, ErmakovParams};
use milne::schrodinger::{integrate_regular, Side};
use milne::{semiclassical, spectral};
use milne_bench::{harmonic, quartic};

fn regular_solution(c: &mut Criterion) {
    let slice = harmonic().slice(4.9).unwrap();
    c.bench_function("numerov regular solution", |b| b.iter(|| integrate_regular(black_box(&slice), Side::Left).unwrap()));
}

fn eigenvalues(c: &mut Criterion) {
    let problem = harmonic();
    c.bench_function("eigenvalues n <= 10 (harmonic)", |b| b.iter(|| spectral::find_eigenvalues(black_box(&problem), 10).unwrap()));
    let problem = quartic();
    c.bench_function("eigenvalues n <= 5 (quartic)", |b| b.iter(|| spectral::find_eigenvalues(black_box(&problem), 5).unwrap()));
}

fn amplitude_phase(c: &mut Criterion) {
    let problem = harmonic();
    let map = problem.quantum_number_map(10).unwrap();
    let pair = problem.basis(4.9, 1.0, &map).unwrap();
    let params = ErmakovParams::new(1.0, 0.3).unwrap();
    c.bench_function("basis pair at E = 4.9", |b| b.iter(|| problem.basis(black_box(4.9), 1.0, &map).unwrap()));
    c.bench_function("amplitude and phase", |b| b.iter(|| ermakov::phase(black_box(&pair), &params).unwrap()));
    c.bench_function("accumulated phase", |b| {
        b.iter(|| spectral::accumulated_phase_smooth(&problem, &map, black_box(4.9), 1.0).unwrap())
    });
}

fn semiclassics(c: &mut Criterion) {
    let slice = harmonic().slice(4.9).unwrap();
    c.bench_function("reduced action", |b| b.iter(|| semiclassical::reduced_action(black_box(&slice))));
    c.bench_function("order-2 expansion", |b| b.iter(|| semiclassical::hbar_expansion(black_box(&slice), 1.0, 2).unwrap()));
}

criterion_group!(benches, regular_solution, eigenvalues, amplitude_phase, semiclassics);
criterion_main!(benches);
