//! FFT multipliers on periodic grids, constant-coefficient solves, the
//! low-frequency-cutoff parametrix and the frozen-coefficient Neumann
//! iteration.
//!
//! Transforms follow one convention: the forward FFT is unscaled and the
//! inverse carries `1 / N`. A derivative `d/dx_l` is the multiplier `i k_l`.

mod format;
mod grid;
mod neumann;
mod trig;

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

pub use format::{read_grid, read_grid_file, write_grid, write_grid_file, GRID_MAGIC, GRID_VERSION};
pub use grid::{GridField, GridSpec};
pub use neumann::{
    contraction_estimate, default_freeze_point, solve_variable_neumann, NeumannOptions, NeumannResult,
    NeumannSummary, DEFAULT_CONTRACTION_THRESHOLD,
};
pub use trig::{forward_apply, TrigPolynomial, TrigTerm};

use crate::error::{Error, Result};
use crate::index_algebra::MultiIndex;
use crate::symbol_analysis::{
    ellipticity_bounds, perturbation_radius, LowFrequencyCutoff, OperatorSpec, Polynomial, RationalSymbol,
    SphereOptions,
};

/// A Fourier multiplier `m(xi)`.
pub trait Multiplier: Sync {
    fn eval(&self, xi: &[f64]) -> Complex64;
}

impl Multiplier for RationalSymbol {
    fn eval(&self, xi: &[f64]) -> Complex64 {
        RationalSymbol::eval(self, xi)
    }
}

impl Multiplier for Polynomial {
    fn eval(&self, xi: &[f64]) -> Complex64 {
        Polynomial::eval(self, xi)
    }
}

/// Wraps a closure as a [`Multiplier`].
pub struct FnMultiplier<F>(pub F);

impl<F: Fn(&[f64]) -> Complex64 + Sync> Multiplier for FnMultiplier<F> {
    fn eval(&self, xi: &[f64]) -> Complex64 {
        (self.0)(xi)
    }
}

/// Treatment of the zero frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DcPolicy {
    /// Output mean is zero; the multiplier is never evaluated at `0`.
    #[default]
    Zero,
    /// `m(0)` is applied and must be finite.
    Keep,
    /// Fails unless the input mean is negligible, then behaves as `Zero`.
    Error,
}

/// Relative size below which a zero-frequency amplitude counts as absent.
pub const DC_NEGLIGIBLE: f64 = 1e-12;

fn finite(z: Complex64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

fn spectrum_scale(hat: &[Complex64]) -> f64 {
    hat.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// `m * hat` on the lattice of `spec`.
pub fn apply_to_spectrum(
    ms: &dyn Multiplier,
    spec: &GridSpec,
    hat: &[Complex64],
    dc: DcPolicy,
) -> Result<Vec<Complex64>> {
    let n = spec.dim();
    let k = spec.wavevectors();
    if dc == DcPolicy::Error && hat[0].norm() > DC_NEGLIGIBLE * spectrum_scale(hat).max(f64::MIN_POSITIVE) {
        return Err(Error::Precondition(format!(
            "input has a zero-frequency component {} but the policy forbids it",
            hat[0]
        )));
    }
    let out: Vec<Option<Complex64>> = hat
        .par_iter()
        .enumerate()
        .map(|(flat, h)| {
            if flat == 0 && dc != DcPolicy::Keep {
                return Some(Complex64::new(0.0, 0.0));
            }
            let m = ms.eval(&k[flat * n..(flat + 1) * n]);
            finite(m).then(|| m * h)
        })
        .collect();
    out.into_iter()
        .enumerate()
        .map(|(flat, v)| {
            v.ok_or_else(|| Error::Singular {
                frequency: k[flat * n..(flat + 1) * n].to_vec(),
            })
        })
        .collect()
}

/// `(m f^)^v`: forward FFT, pointwise product, inverse FFT.
pub fn apply_multiplier(ms: &dyn Multiplier, f: &GridField, dc: DcPolicy) -> Result<GridField> {
    let hat = apply_to_spectrum(ms, f.spec(), &f.spectrum(), dc)?;
    GridField::from_spectrum(f.spec(), hat)
}

/// `D^gamma f` by spectral differentiation.
pub fn spectral_derivative(f: &GridField, gamma: &MultiIndex) -> Result<GridField> {
    apply_multiplier(&Polynomial::i_xi_power(gamma), f, DcPolicy::Keep)
}

/// Derivative fields of a solve together with its defect.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub derivatives: BTreeMap<MultiIndex, GridField>,
    /// True when a non-negligible mean of the right-hand side was projected out.
    pub dc_policy_applied: bool,
    /// Relative `l^2` defect of the equation on the nonzero modes.
    pub residual: f64,
}

/// Default bound on [`SolveResult::residual`].
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-9;

fn common_grid(f: &BTreeMap<MultiIndex, GridField>, n: usize) -> Result<GridSpec> {
    let mut it = f.values();
    let Some(first) = it.next() else {
        return Err(Error::Contract("right-hand side map is empty".into()));
    };
    for g in it {
        first.spec().check_same(g.spec())?;
    }
    for beta in f.keys() {
        crate::error::check_dim(n, beta.dim())?;
    }
    crate::error::check_dim(n, first.spec().dim())?;
    Ok(first.spec().clone())
}

/// `sum_beta (i xi)^beta f_beta^`, the transformed right-hand side.
fn rhs_spectrum(spec: &GridSpec, f: &BTreeMap<MultiIndex, Vec<Complex64>>) -> Vec<Complex64> {
    let n = spec.dim();
    let k = spec.wavevectors();
    let polys: Vec<(Polynomial, &Vec<Complex64>)> =
        f.iter().map(|(b, h)| (Polynomial::i_xi_power(b), h)).collect();
    (0..spec.len())
        .map(|flat| {
            let xi = &k[flat * n..(flat + 1) * n];
            polys.iter().map(|(p, h)| p.eval(xi) * h[flat]).sum()
        })
        .collect()
}

fn relative_defect(lhs: &[Complex64], rhs: &[Complex64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    // zero mode excluded: it is fixed by the DC convention, not by the equation
    for (a, b) in lhs.iter().zip(rhs).skip(1) {
        num += (a - b).norm_sqr();
        den += b.norm_sqr();
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Shared core: `D^gamma u^ = (i xi)^gamma * weight(xi) * g^(xi)` for every
/// target, where `g^` is the transformed right-hand side.
fn solve_spectral(
    spec: &GridSpec,
    g_hat: &[Complex64],
    denominator: &Polynomial,
    cutoff: Option<&LowFrequencyCutoff>,
    targets: &BTreeSet<MultiIndex>,
) -> Result<BTreeMap<MultiIndex, Vec<Complex64>>> {
    let n = spec.dim();
    let k = spec.wavevectors();
    let weights: Vec<std::result::Result<Complex64, usize>> = (0..spec.len())
        .into_par_iter()
        .map(|flat| {
            if flat == 0 {
                return Ok(Complex64::new(0.0, 0.0));
            }
            let xi = &k[flat * n..(flat + 1) * n];
            let c = cutoff.map_or(1.0, |c| c.factor(xi));
            if c == 0.0 {
                return Ok(Complex64::new(0.0, 0.0));
            }
            let d = denominator.eval(xi);
            let w = c / d;
            if d.norm() == 0.0 || !finite(w) {
                Err(flat)
            } else {
                Ok(w * g_hat[flat])
            }
        })
        .collect();
    let mut base = Vec::with_capacity(weights.len());
    for w in weights {
        match w {
            Ok(v) => base.push(v),
            Err(flat) => {
                return Err(Error::Singular {
                    frequency: k[flat * n..(flat + 1) * n].to_vec(),
                })
            }
        }
    }
    Ok(targets
        .iter()
        .map(|gamma| {
            let mono = Polynomial::i_xi_power(gamma);
            let hat = (0..spec.len())
                .map(|flat| mono.eval(&k[flat * n..(flat + 1) * n]) * base[flat])
                .collect();
            (gamma.clone(), hat)
        })
        .collect())
}

fn to_fields(spec: &GridSpec, hats: BTreeMap<MultiIndex, Vec<Complex64>>) -> Result<BTreeMap<MultiIndex, GridField>> {
    hats.into_iter()
        .map(|(g, h)| Ok((g, GridField::from_spectrum(spec, h)?)))
        .collect()
}

/// Transformed `sum_{alpha beta} a_{alpha beta} (i xi)^beta (D^alpha u)^`
/// for constant coefficients.
fn operator_on_derivatives(
    spec: &GridSpec,
    terms: &[(MultiIndex, MultiIndex, Complex64)],
    derivs: &BTreeMap<MultiIndex, Vec<Complex64>>,
) -> Vec<Complex64> {
    let n = spec.dim();
    let k = spec.wavevectors();
    (0..spec.len())
        .map(|flat| {
            let xi = &k[flat * n..(flat + 1) * n];
            terms
                .iter()
                .map(|(a, b, c)| c * Polynomial::i_xi_power(b).eval(xi) * derivs[a][flat])
                .sum()
        })
        .collect()
}

fn constant_terms(op: &OperatorSpec, lower: bool) -> Result<Vec<(MultiIndex, MultiIndex, Complex64)>> {
    let mut out = Vec::new();
    let maps = if lower {
        vec![op.coeffs(), op.lower_order()]
    } else {
        vec![op.coeffs()]
    };
    for map in maps {
        for ((a, b), c) in map {
            out.push((a.clone(), b.clone(), c.at(None)?));
        }
    }
    Ok(out)
}

fn lost_dc(g_hat: &[Complex64]) -> bool {
    g_hat[0].norm() > DC_NEGLIGIBLE * spectrum_scale(g_hat).max(f64::MIN_POSITIVE)
}

/// Solves `P u = sum_beta D^beta f_beta` for `D^alpha u`, `alpha` in `A`.
pub fn solve_constant(op: &OperatorSpec, f: &BTreeMap<MultiIndex, GridField>) -> Result<SolveResult> {
    solve_constant_for(op, f, op.index_pair().a())
}

/// As [`solve_constant`] for an arbitrary set of derivatives; `A` is always
/// included so the defect can be measured.
pub fn solve_constant_for(
    op: &OperatorSpec,
    f: &BTreeMap<MultiIndex, GridField>,
    targets: &BTreeSet<MultiIndex>,
) -> Result<SolveResult> {
    if !op.is_constant() {
        return Err(Error::Contract("solve_constant needs constant coefficients".into()));
    }
    if op.has_lower_order() {
        return Err(Error::Contract(
            "solve_constant takes the principal part only; use parametrix_apply".into(),
        ));
    }
    let spec = common_grid(f, op.dim())?;
    let hats: BTreeMap<MultiIndex, Vec<Complex64>> = f.iter().map(|(b, g)| (b.clone(), g.spectrum())).collect();
    let g_hat = rhs_spectrum(&spec, &hats);
    let mut all: BTreeSet<MultiIndex> = targets.clone();
    all.extend(op.index_pair().a().iter().cloned());
    let p = op.principal_symbol(None)?;
    let derivs = solve_spectral(&spec, &g_hat, &p, None, &all)?;
    let fields = to_fields(&spec, derivs)?;
    // defect from the returned fields, so transform round-off is included
    let back: BTreeMap<MultiIndex, Vec<Complex64>> = op
        .index_pair()
        .a()
        .iter()
        .map(|a| (a.clone(), fields[a].spectrum()))
        .collect();
    let lhs = operator_on_derivatives(&spec, &constant_terms(op, false)?, &back);
    let residual = relative_defect(&lhs, &g_hat);
    let derivatives = fields.into_iter().filter(|(g, _)| targets.contains(g)).collect();
    Ok(SolveResult {
        derivatives,
        dc_policy_applied: lost_dc(&g_hat),
        residual,
    })
}

/// Output of [`parametrix_apply`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParametrixResult {
    pub v: GridField,
    /// `D^gamma v` for `gamma` in the lower index set `A'`.
    pub derivatives: BTreeMap<MultiIndex, GridField>,
    pub cutoff_radius: f64,
    /// Radius beyond which `|p + h| >= lambda |xi|^m / 2` was certified.
    pub perturbation_radius: f64,
    /// Relative defect of `(P + H) v = (1 - phi) sum D^beta f_beta` on nonzero modes.
    pub residual: f64,
}

/// `v = ((1 - phi) / (p + h) sum (i xi)^beta f_beta^)^v` with
/// `phi(xi) = psi(T_{1/c} xi)`, so the multiplier vanishes on `|xi| <= c / 2`.
pub fn parametrix_apply(
    op: &OperatorSpec,
    f: &BTreeMap<MultiIndex, GridField>,
    cutoff_radius: f64,
) -> Result<ParametrixResult> {
    if !op.is_constant() {
        return Err(Error::Contract("parametrix needs constant coefficients".into()));
    }
    if !(cutoff_radius >= 0.0 && cutoff_radius.is_finite()) {
        return Err(Error::Domain(format!("cutoff radius must be >= 0, got {cutoff_radius}")));
    }
    let spec = common_grid(f, op.dim())?;
    let opts = SphereOptions::for_dim(op.dim());
    let bounds = ellipticity_bounds(&op.principal(), None, opts)?;
    let radius = perturbation_radius(op, &bounds, opts)?;
    if cutoff_radius < 2.0 * radius {
        return Err(Error::Precondition(format!(
            "cutoff radius {cutoff_radius} is below twice the perturbation radius {radius}"
        )));
    }
    let cutoff = LowFrequencyCutoff::new(cutoff_radius, op.kappa().clone());
    let hats: BTreeMap<MultiIndex, Vec<Complex64>> = f.iter().map(|(b, g)| (b.clone(), g.spectrum())).collect();
    let g_hat = rhs_spectrum(&spec, &hats);
    let symbol = op.full_symbol(None)?;
    let mut targets = op.index_pair().lower();
    targets.insert(MultiIndex::zero(op.dim()));
    let derivs = solve_spectral(&spec, &g_hat, &symbol, Some(&cutoff), &targets)?;
    let mut fields = to_fields(&spec, derivs)?;
    let v = fields
        .remove(&MultiIndex::zero(op.dim()))
        .expect("zero index is a target");
    let n = spec.dim();
    let k = spec.wavevectors();
    let v_hat = v.spectrum();
    let lhs: Vec<Complex64> = (0..spec.len())
        .map(|flat| symbol.eval(&k[flat * n..(flat + 1) * n]) * v_hat[flat])
        .collect();
    let rhs: Vec<Complex64> = (0..spec.len())
        .map(|flat| {
            if flat == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                cutoff.factor(&k[flat * n..(flat + 1) * n]) * g_hat[flat]
            }
        })
        .collect();
    let residual = relative_defect(&lhs, &rhs);
    if op.index_pair().lower().contains(&MultiIndex::zero(op.dim())) {
        fields.insert(MultiIndex::zero(op.dim()), v.clone());
    }
    Ok(ParametrixResult {
        v,
        derivatives: fields,
        cutoff_radius,
        perturbation_radius: radius,
        residual,
    })
}
