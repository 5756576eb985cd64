//! Polynomial symbols of kappa-homogeneous operators: evaluation, homogeneity
//! and ellipticity certificates, exact differentiation of rational multipliers.

mod operator;
mod polynomial;
mod rational;
mod sphere;

pub mod catalog;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use operator::{Coefficient, OperatorSpec, TermKey};
pub use polynomial::{i_pow, Polynomial};
pub use rational::{rational_derivative, LowFrequencyCutoff, RationalSymbol};
pub use sphere::{project_to_sphere, KappaSphere};

use crate::error::{check_dim, Error, Result};
use crate::index_algebra::{dilate, DEFAULT_SEED};

/// Relative tolerance of [`check_homogeneity`].
pub const HOMOGENEITY_TOL: f64 = 1e-10;
/// `lambda` below this is reported as a degenerate symbol.
pub const DEGENERACY_TOL: f64 = 1e-12;
/// Default coordinate-search steps after the sphere scan.
pub const DEFAULT_REFINE_ITERS: usize = 50;

/// Full symbol `p(x, xi) + h(x, xi)`.
pub fn eval_symbol(op: &OperatorSpec, x: Option<&[f64]>, xi: &[f64]) -> Result<Complex64> {
    check_dim(op.dim(), xi.len())?;
    if let Some(x) = x {
        check_dim(op.dim(), x.len())?;
    }
    Ok(op.full_symbol(x)?.eval(xi))
}

/// Outcome of the sampled test `p(T_r xi) = r^m p(xi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomogeneityCheck {
    pub passed: bool,
    pub max_rel_deviation: f64,
    pub trials: usize,
}

/// Samples `r` in `[1/8, 8]` and `xi` in `[-2, 2]^n`; the full symbol
/// (principal plus lower order) is tested.
pub fn check_homogeneity(op: &OperatorSpec, x: Option<&[f64]>, trials: usize, seed: u64) -> Result<HomogeneityCheck> {
    let symbol = op.full_symbol(x)?;
    Ok(polynomial_homogeneity(&symbol, op, trials, seed))
}

fn polynomial_homogeneity(symbol: &Polynomial, op: &OperatorSpec, trials: usize, seed: u64) -> HomogeneityCheck {
    let kappa = op.kappa();
    let m = op.order() as i32;
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let r = 2f64.powf(rng.random_range(-3.0..3.0));
        let xi: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let lhs = symbol.eval(&dilate(r, &xi, kappa).expect("r > 0"));
        let rhs = symbol.eval(&xi) * r.powi(m);
        let scale = lhs.norm().max(rhs.norm());
        if scale > 0.0 {
            worst = worst.max((lhs - rhs).norm() / scale);
        }
    }
    HomogeneityCheck {
        passed: worst <= HOMOGENEITY_TOL,
        max_rel_deviation: worst,
        trials,
    }
}

/// Sampled certificate for `lambda |xi|^m <= |p(xi)| <= Lambda |xi|^m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipticityBounds {
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub upper: f64,
    pub argmin_xi: Vec<f64>,
    pub argmax_xi: Vec<f64>,
    /// Grid point realising `lambda` for field coefficients.
    pub argmin_x: Option<Vec<f64>>,
    pub sampling_resolution: usize,
    pub refine_iters: usize,
    pub seed: u64,
}

/// Options for [`ellipticity_bounds`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereOptions {
    pub resolution: usize,
    pub refine_iters: usize,
    pub seed: u64,
}

impl SphereOptions {
    pub fn for_dim(n: usize) -> Self {
        Self {
            resolution: KappaSphere::default_resolution(n),
            refine_iters: DEFAULT_REFINE_ITERS,
            seed: DEFAULT_SEED,
        }
    }
}

struct Extremes {
    min: (f64, usize),
    max: (f64, usize),
}

fn scan(values: impl Iterator<Item = f64>) -> Extremes {
    let mut ex = Extremes {
        min: (f64::INFINITY, 0),
        max: (f64::NEG_INFINITY, 0),
    };
    for (i, v) in values.enumerate() {
        // strict comparisons keep the first index on ties
        if v < ex.min.0 {
            ex.min = (v, i);
        }
        if v > ex.max.0 {
            ex.max = (v, i);
        }
    }
    ex
}

/// Bounds of `|p|` on the unit kappa-sphere for the principal symbol.
///
/// With field coefficients and `x = None` every grid point is checked and
/// the reported `lambda` (`Lambda`) is the min (max) over the grid.
pub fn ellipticity_bounds(op: &OperatorSpec, x: Option<&[f64]>, opts: SphereOptions) -> Result<EllipticityBounds> {
    let sphere = KappaSphere::new(op.kappa(), opts.resolution, opts.seed);
    if op.is_constant() || x.is_some() {
        let symbol = op.principal_symbol(x)?;
        constant_bounds(&symbol, op, &sphere, opts, None)
    } else {
        variable_bounds(op, &sphere, opts)
    }
}

fn require_homogeneous(symbol: &Polynomial, op: &OperatorSpec) -> Result<()> {
    let check = polynomial_homogeneity(symbol, op, 64, DEFAULT_SEED);
    if check.passed {
        Ok(())
    } else {
        Err(Error::Contract(format!(
            "principal symbol is not kappa-homogeneous of order {} (relative deviation {:e})",
            op.order(),
            check.max_rel_deviation
        )))
    }
}

fn constant_bounds(
    symbol: &Polynomial,
    op: &OperatorSpec,
    sphere: &KappaSphere,
    opts: SphereOptions,
    argmin_x: Option<Vec<f64>>,
) -> Result<EllipticityBounds> {
    require_homogeneous(symbol, op)?;
    let abs = |xi: &[f64]| symbol.eval(xi).norm();
    let values: Vec<f64> = sphere.points().par_iter().map(|p| abs(p)).collect();
    let ex = scan(values.into_iter());
    let (argmin, lambda) = sphere.refine(ex.min.1, opts.refine_iters, abs, |a, b| a < b);
    let (argmax, upper) = sphere.refine(ex.max.1, opts.refine_iters, abs, |a, b| a > b);
    if lambda < DEGENERACY_TOL {
        return Err(Error::Degenerate { lambda, argmin });
    }
    Ok(EllipticityBounds {
        lambda,
        upper,
        argmin_xi: argmin,
        argmax_xi: argmax,
        argmin_x,
        sampling_resolution: sphere.len(),
        refine_iters: opts.refine_iters,
        seed: sphere.seed(),
    })
}

fn variable_bounds(op: &OperatorSpec, sphere: &KappaSphere, opts: SphereOptions) -> Result<EllipticityBounds> {
    let grid = op.coefficient_grid().expect("field coefficients present").clone();
    let terms: Vec<(&TermKey, &Coefficient)> = op.coeffs().iter().collect();
    // (i xi)^{alpha+beta} on every sphere point, one row per term
    let basis: Vec<Vec<Complex64>> = terms
        .iter()
        .map(|((a, b), _)| {
            let mono = Polynomial::i_xi_power(&a.add(b));
            sphere.points().iter().map(|p| mono.eval(p)).collect()
        })
        .collect();
    for flat in [0, grid.len() / 2] {
        require_homogeneous(&op.frozen_at_sample(flat).principal_symbol(None)?, op)?;
    }
    let per_point: Vec<(f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|flat| {
            let coeffs: Vec<Complex64> = terms.iter().map(|(_, c)| c.sample(flat)).collect();
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            for s in 0..sphere.len() {
                let v: Complex64 = coeffs.iter().zip(&basis).map(|(c, row)| c * row[s]).sum();
                let v = v.norm();
                lo = lo.min(v);
                hi = hi.max(v);
            }
            (lo, hi)
        })
        .collect();
    let lo = scan(per_point.iter().map(|p| p.0)).min.1;
    let hi = scan(per_point.iter().map(|p| p.1)).max.1;
    let at_lo = op.frozen_at_sample(lo).principal_symbol(None)?;
    let at_hi = op.frozen_at_sample(hi).principal_symbol(None)?;
    let mut bounds = constant_bounds(&at_lo, op, sphere, opts, Some(grid.point(lo)))?;
    let high = constant_bounds(&at_hi, op, sphere, opts, None)?;
    if high.upper > bounds.upper {
        bounds.upper = high.upper;
        bounds.argmax_xi = high.argmax_xi;
    }
    Ok(bounds)
}

/// Smallest sampled `C` such that `|p| - |h| >= lambda rho^m / 2` on the
/// kappa-spheres of radius `rho >= C`.
///
/// `|p + h| >= |p| - |h|`, so this is a conservative certificate for the
/// bound `|p + h| >= lambda |xi|^m / 2`. Radii are doubled from `2^-10`
/// until four consecutive doublings pass, then the threshold is bisected.
pub fn perturbation_radius(op: &OperatorSpec, bounds: &EllipticityBounds, opts: SphereOptions) -> Result<f64> {
    if !op.is_constant() {
        return Err(Error::Contract("perturbation radius needs constant coefficients".into()));
    }
    let h = op.lower_symbol(None)?;
    if h.is_zero() {
        return Ok(0.0);
    }
    let p = op.principal_symbol(None)?;
    let kappa = op.kappa();
    let m = op.order() as i32;
    let sphere = KappaSphere::new(kappa, opts.resolution, opts.seed);
    let lambda = bounds.lambda;
    let holds = |rho: f64| -> bool {
        let target = 0.5 * lambda * rho.powi(m);
        sphere.points().par_iter().all(|theta| {
            let xi = dilate(rho, theta, kappa).expect("rho > 0");
            p.eval(&xi).norm() - h.eval(&xi).norm() >= target
        })
    };
    const STREAK: usize = 4;
    let mut rho = 2f64.powi(-10);
    let mut first_pass: Option<f64> = None;
    let mut streak = 0;
    let mut last_fail = 0.0;
    while rho <= 2f64.powi(30) {
        if holds(rho) {
            if first_pass.is_none() {
                first_pass = Some(rho);
            }
            streak += 1;
            if streak == STREAK {
                break;
            }
        } else {
            first_pass = None;
            streak = 0;
            last_fail = rho;
        }
        rho *= 2.0;
    }
    let Some(upper) = first_pass.filter(|_| streak == STREAK) else {
        return Err(Error::Domain(
            "lower-order part dominates up to radius 2^30; its kappa-degree must be below m".into(),
        ));
    };
    if last_fail == 0.0 {
        return Ok(upper);
    }
    let (mut lo, mut hi) = (last_fail, upper);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-10 * hi {
            break;
        }
    }
    Ok(hi)
}
