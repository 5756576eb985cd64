//! Reference operators used by tests, benches and bundled problem specs.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;

use super::operator::{Coefficient, OperatorSpec};
use crate::error::Result;
use crate::index_algebra::{IndexSetPair, KappaWeight, MultiIndex};
use crate::spectral_solver::{GridField, GridSpec};

fn pair(kappa: Vec<u32>, m: u32) -> IndexSetPair {
    let kappa = KappaWeight::new(kappa).expect("valid weights");
    let n = kappa.dim();
    IndexSetPair::from_b(BTreeSet::from([MultiIndex::zero(n)]), m, kappa).expect("valid index pair")
}

fn mi(e: &[u32]) -> MultiIndex {
    MultiIndex::new(e.to_vec())
}

fn re(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

/// `du/dt - d^2u/dx^2` on `(x, t)` with weights `(1, 2)`; symbol `xi^2 + i tau`.
pub fn heat() -> OperatorSpec {
    let z = MultiIndex::zero(2);
    OperatorSpec::constant(
        pair(vec![1, 2], 2),
        &[(mi(&[2, 0]), z.clone(), re(-1.0)), (mi(&[0, 1]), z, re(1.0))],
    )
    .expect("heat operator")
}

/// Heat operator with diffusion `1 + eps sin(x)` sampled on `grid`.
pub fn heat_variable(eps: f64, grid: &GridSpec) -> Result<OperatorSpec> {
    let z = MultiIndex::zero(2);
    let a = GridField::from_real_fn(grid, |p| -(1.0 + eps * p[0].sin()));
    let mut coeffs = BTreeMap::new();
    coeffs.insert((mi(&[2, 0]), z.clone()), Coefficient::Field(a));
    coeffs.insert((mi(&[0, 1]), z), Coefficient::Constant(re(1.0)));
    OperatorSpec::new(pair(vec![1, 2], 2), coeffs, BTreeMap::new())
}

/// Heat operator plus the zeroth-order term `c u`.
pub fn heat_with_potential(c: f64) -> OperatorSpec {
    let z = MultiIndex::zero(2);
    let mut lower = BTreeMap::new();
    lower.insert((z.clone(), z), Coefficient::Constant(re(c)));
    heat().with_lower_order(lower).expect("zeroth order term")
}

/// `d^2u/dt^2 - d^3u/dx^3` with weights `(2, 3)`, order 6; symbol `-tau^2 + i xi^3`.
pub fn wave_cubic() -> OperatorSpec {
    let z = MultiIndex::zero(2);
    OperatorSpec::constant(
        pair(vec![2, 3], 6),
        &[(mi(&[3, 0]), z.clone(), re(-1.0)), (mi(&[0, 2]), z, re(1.0))],
    )
    .expect("cubic wave operator")
}

/// `-Laplace` in `n` dimensions; symbol `|xi|^2`.
pub fn laplacian(n: usize) -> OperatorSpec {
    let z = MultiIndex::zero(n);
    let terms: Vec<_> = (0..n)
        .map(|l| {
            let mut e = vec![0; n];
            e[l] = 2;
            (MultiIndex::new(e), z.clone(), re(-1.0))
        })
        .collect();
    OperatorSpec::constant(pair(vec![1; n], 2), &terms).expect("laplacian")
}

/// Heat operator without its time derivative; symbol `xi^2`, zero at `(0, 1)`.
pub fn degenerate_heat() -> OperatorSpec {
    OperatorSpec::constant(pair(vec![1, 2], 2), &[(mi(&[2, 0]), MultiIndex::zero(2), re(-1.0))])
        .expect("degenerate operator")
}
