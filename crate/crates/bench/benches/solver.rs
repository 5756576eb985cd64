use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use kappa_core::dyadic_decomposition::mihlin_constant;
use kappa_core::oscillation_metrics::oscillation_profile;
use kappa_core::spectral_solver::{forward_apply, solve_constant, solve_variable_neumann, NeumannOptions, TrigPolynomial};
use kappa_core::symbol_analysis::{catalog, ellipticity_bounds, RationalSymbol, SphereOptions};
use kappa_core::{GridSpec, MultiIndex};

fn manufactured() -> TrigPolynomial {
    TrigPolynomial::real_cos(vec![(vec![1, 0], 1.0, 0.3), (vec![2, 1], 0.5, 0.1), (vec![0, 3], 0.25, 1.0)])
}

fn solvers(c: &mut Criterion) {
    let op = catalog::heat();
    for n in [64usize, 128, 256] {
        let grid = GridSpec::torus(2, n).unwrap();
        let f = forward_apply(&op, &manufactured().sample(&grid)).unwrap();
        c.bench_function(&format!("solve_constant heat {n}^2"), |b| b.iter(|| solve_constant(&op, black_box(&f)).unwrap()));
    }
    let grid = GridSpec::torus(2, 64).unwrap();
    let var = catalog::heat_variable(0.05, &grid).unwrap();
    let f = forward_apply(&var, &manufactured().sample(&grid)).unwrap();
    let opts = NeumannOptions::default();
    c.bench_function("neumann heat eps=0.05 64^2", |b| {
        b.iter(|| solve_variable_neumann(&var, black_box(&f), &opts).unwrap())
    });
}

fn symbols(c: &mut Criterion) {
    let op = catalog::heat();
    c.bench_function("ellipticity heat", |b| {
        b.iter(|| ellipticity_bounds(black_box(&op), None, SphereOptions::for_dim(2)).unwrap())
    });
    let z = MultiIndex::zero(2);
    let ms = RationalSymbol::solution_multiplier(&op, &MultiIndex::new(vec![2, 0]), &z).unwrap();
    c.bench_function("mihlin heat 10 shells at 256", |b| {
        b.iter(|| mihlin_constant(black_box(&ms), op.kappa(), &z, -5..=4, 256).unwrap())
    });
}

fn oscillation(c: &mut Criterion) {
    let op = catalog::heat();
    let grid = GridSpec::torus(2, 64).unwrap();
    let rhs: BTreeMap<_, _> = forward_apply(&op, &manufactured().sample(&grid)).unwrap();
    let f = &rhs[&MultiIndex::zero(2)];
    c.bench_function("sup oscillation profile 64^2", |b| {
        b.iter(|| oscillation_profile(black_box(f), op.kappa(), 64).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = solvers, symbols, oscillation
}
criterion_main!(benches);
