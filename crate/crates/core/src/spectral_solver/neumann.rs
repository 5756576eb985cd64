use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::grid::{GridField, GridSpec};
use super::{common_grid, relative_defect, rhs_spectrum, solve_constant_for, SolveResult};
use crate::error::{Error, Result};
use crate::index_algebra::MultiIndex;
use crate::symbol_analysis::{Coefficient, OperatorSpec, Polynomial, TermKey};

/// A priori contraction estimates at or above this value abort the iteration.
pub const DEFAULT_CONTRACTION_THRESHOLD: f64 = 0.5;

/// Consecutive non-contracting steps tolerated before giving up.
const STALL_LIMIT: usize = 3;

/// Relative step size treated as round-off.
const NOISE_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct NeumannOptions {
    /// Freeze point; `None` picks [`default_freeze_point`].
    pub freeze: Option<Vec<f64>>,
    pub max_iters: usize,
    /// Stop once `max_alpha sup |D^alpha u_{k+1} - D^alpha u_k|` falls below
    /// `tol` times `max_alpha sup |D^alpha u_{k+1}|`.
    pub tol: f64,
    pub contraction_threshold: f64,
    /// Additional derivatives to return with the converged solution.
    pub extra_targets: BTreeSet<MultiIndex>,
}

impl Default for NeumannOptions {
    fn default() -> Self {
        Self {
            freeze: None,
            max_iters: 200,
            tol: 1e-12,
            contraction_threshold: DEFAULT_CONTRACTION_THRESHOLD,
            extra_targets: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeumannResult {
    pub solve: SolveResult,
    /// `|u_{k+1} - u_k| / |u_k - u_{k-1}|` per step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub freeze_point: Vec<f64>,
    /// `max_alpha' sum_{alpha beta} sup |m_{alpha' beta}| osc(a_{alpha beta})`.
    pub contraction_estimate: f64,
}

impl NeumannResult {
    /// Largest factor observed after the first step, the measured contraction.
    pub fn contraction_factor(&self) -> f64 {
        self.trace.iter().copied().fold(0.0, f64::max)
    }
}

/// `sup_x |a(x) - c|` over the samples of a coefficient.
fn oscillation_about(c: &Coefficient, value: Complex64) -> f64 {
    match c {
        Coefficient::Constant(a) => (a - value).norm(),
        Coefficient::Field(f) => f.values().iter().map(|v| (v - value).norm()).fold(0.0, f64::max),
    }
}

fn is_real(f: &GridField) -> bool {
    f.values().iter().all(|v| v.im == 0.0)
}

/// Grid sample minimising `sum_{alpha beta} sup_x |a(x) - a(x_k)|`.
pub fn default_freeze_point(op: &OperatorSpec) -> Option<usize> {
    let grid = op.coefficient_grid()?;
    let fields: Vec<&GridField> = op
        .coeffs()
        .values()
        .filter_map(|c| match c {
            Coefficient::Field(f) => Some(f),
            Coefficient::Constant(_) => None,
        })
        .collect();
    let real = fields.iter().all(|f| is_real(f));
    let extremes: Vec<(f64, f64)> = fields
        .iter()
        .map(|f| {
            f.values()
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v.re), hi.max(v.re)))
        })
        .collect();
    let cost = |k: usize| -> f64 {
        fields
            .iter()
            .zip(&extremes)
            .map(|(f, &(lo, hi))| {
                let c = f.values()[k];
                if real {
                    (hi - c.re).max(c.re - lo)
                } else {
                    f.values().iter().map(|v| (v - c).norm()).fold(0.0, f64::max)
                }
            })
            .sum()
    };
    let costs: Vec<f64> = (0..grid.len()).into_par_iter().map(cost).collect();
    let mut best = 0;
    for (k, &c) in costs.iter().enumerate() {
        if c < costs[best] {
            best = k;
        }
    }
    Some(best)
}

/// Row-sum estimate of the iteration map's norm for the operator frozen
/// at `frozen` (sup of each multiplier over the nonzero lattice modes).
pub fn contraction_estimate(op: &OperatorSpec, frozen: &OperatorSpec, spec: &GridSpec) -> Result<f64> {
    let n = spec.dim();
    let k = spec.wavevectors();
    let p0 = frozen.principal_symbol(None)?;
    let p_values: Vec<Complex64> = (1..spec.len()).map(|flat| p0.eval(&k[flat * n..(flat + 1) * n])).collect();
    let osc: Vec<(&TermKey, f64)> = op
        .coeffs()
        .iter()
        .map(|(key, c)| {
            let a0 = frozen.coefficient(&key.0, &key.1).expect("same keys").at(None)?;
            Ok((key, oscillation_about(c, a0)))
        })
        .collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for out in op.index_pair().a() {
        let mut row = 0.0;
        for ((_, beta), o) in &osc {
            if *o == 0.0 {
                continue;
            }
            let mono = Polynomial::i_xi_power(&out.add(beta));
            let sup = (1..spec.len())
                .map(|flat| (mono.eval(&k[flat * n..(flat + 1) * n]) / p_values[flat - 1]).norm())
                .fold(0.0, f64::max);
            row += sup * o;
        }
        worst = worst.max(row);
    }
    Ok(worst)
}

/// Transformed `sum_{alpha beta} (i xi)^beta (a_{alpha beta}(x) D^alpha u)^`.
fn variable_operator_spectrum(
    op: &OperatorSpec,
    spec: &GridSpec,
    derivs: &BTreeMap<MultiIndex, GridField>,
) -> Result<Vec<Complex64>> {
    let mut by_beta: BTreeMap<MultiIndex, GridField> = BTreeMap::new();
    for ((alpha, beta), c) in op.coeffs() {
        let d = &derivs[alpha];
        let term = match c {
            Coefficient::Constant(a) => d.scale(*a),
            Coefficient::Field(a) => a.mul(d)?,
        };
        let acc = match by_beta.remove(beta) {
            Some(prev) => prev.add(&term)?,
            None => term,
        };
        by_beta.insert(beta.clone(), acc);
    }
    let hats = by_beta.iter().map(|(b, g)| (b.clone(), g.spectrum())).collect();
    Ok(rhs_spectrum(spec, &hats))
}

fn max_sup_diff(a: &BTreeMap<MultiIndex, GridField>, b: &BTreeMap<MultiIndex, GridField>) -> Result<f64> {
    let mut worst = 0.0f64;
    for (k, v) in a {
        worst = worst.max(v.sub(&b[k])?.sup_norm());
    }
    Ok(worst)
}

fn max_sup(a: &BTreeMap<MultiIndex, GridField>) -> f64 {
    a.values().map(GridField::sup_norm).fold(0.0, f64::max)
}

/// Fixed-point iteration for `sum D^beta(a_{alpha beta}(x) D^alpha u) = sum D^beta f_beta`:
/// each step solves the operator frozen at `x0` with right-hand side
/// `f_beta + sum_alpha (a_{alpha beta}(x0) - a_{alpha beta}(x)) D^alpha u_k`.
///
/// The solution is determined modulo constants, so the zero mode of the
/// equation is dropped; the reported residual covers the nonzero modes.
pub fn solve_variable_neumann(
    op: &OperatorSpec,
    f: &BTreeMap<MultiIndex, GridField>,
    opts: &NeumannOptions,
) -> Result<NeumannResult> {
    if op.has_lower_order() {
        return Err(Error::Contract("the Neumann iteration takes the principal part only".into()));
    }
    let spec = common_grid(f, op.dim())?;
    if let Some(g) = op.coefficient_grid() {
        g.check_same(&spec)?;
    }
    let (frozen, freeze_point) = match (&opts.freeze, default_freeze_point(op)) {
        (Some(x), _) => (op.frozen_at(x)?, x.clone()),
        (None, Some(k)) => (op.frozen_at_sample(k), spec.point(k)),
        (None, None) => (op.clone(), spec.point(0)),
    };
    let estimate = contraction_estimate(op, &frozen, &spec)?;
    if estimate >= opts.contraction_threshold {
        return Err(Error::Divergence {
            reason: format!(
                "coefficient oscillation too large: contraction estimate {estimate:.4} >= {}",
                opts.contraction_threshold
            ),
            factors: Vec::new(),
        });
    }
    let a_set = op.index_pair().a().clone();
    // perturbation (a(x0) - a(x)) per term
    let deltas: Vec<(MultiIndex, MultiIndex, GridField)> = op
        .coeffs()
        .iter()
        .map(|((alpha, beta), c)| {
            let a0 = frozen.coefficient(alpha, beta).expect("same keys").at(None)?;
            let field = match c {
                Coefficient::Constant(a) => GridField::constant(&spec, a0 - a),
                Coefficient::Field(a) => a.map(|v| a0 - v),
            };
            Ok((alpha.clone(), beta.clone(), field))
        })
        .collect::<Result<_>>()?;
    let trivial = deltas.iter().all(|(_, _, d)| d.sup_norm() == 0.0);
    let rhs_for = |derivs: Option<&BTreeMap<MultiIndex, GridField>>| -> Result<BTreeMap<MultiIndex, GridField>> {
        let mut g = f.clone();
        if let Some(d) = derivs {
            for (alpha, beta, delta) in &deltas {
                let term = delta.mul(&d[alpha])?;
                let acc = match g.remove(beta) {
                    Some(prev) => prev.add(&term)?,
                    None => term,
                };
                g.insert(beta.clone(), acc);
            }
        }
        Ok(g)
    };

    let mut current = solve_constant_for(&frozen, &rhs_for(None)?, &a_set)?.derivatives;
    let mut trace = Vec::new();
    let mut iterations = 1;
    let mut prev_diff: Option<f64> = None;
    let mut stalls = 0;
    let mut converged = trivial;
    while !converged {
        if iterations >= opts.max_iters {
            return Err(Error::Divergence {
                reason: format!("no convergence within {} iterations", opts.max_iters),
                factors: trace,
            });
        }
        let next = solve_constant_for(&frozen, &rhs_for(Some(&current))?, &a_set)?.derivatives;
        iterations += 1;
        let diff = max_sup_diff(&next, &current)?;
        let scale = max_sup(&next);
        // below the round-off floor the ratio carries no information
        let resolved = diff > NOISE_FLOOR * scale;
        if let Some(p) = prev_diff.filter(|p| *p > 0.0 && resolved) {
            let factor = diff / p;
            trace.push(factor);
            if factor >= 1.0 {
                stalls += 1;
                if stalls >= STALL_LIMIT {
                    return Err(Error::Divergence {
                        reason: format!(
                            "contraction factor >= 1 on {STALL_LIMIT} consecutive iterations"
                        ),
                        factors: trace,
                    });
                }
            } else {
                stalls = 0;
            }
        }
        prev_diff = Some(diff);
        current = next;
        converged = diff <= opts.tol * scale || scale == 0.0;
    }

    let mut targets = opts.extra_targets.clone();
    targets.extend(a_set.iter().cloned());
    let mut solve = solve_constant_for(&frozen, &rhs_for(Some(&current))?, &targets)?;
    let lhs = variable_operator_spectrum(op, &spec, &solve.derivatives)?;
    let hats = f.iter().map(|(b, g)| (b.clone(), g.spectrum())).collect();
    let rhs = rhs_spectrum(&spec, &hats);
    solve.residual = relative_defect(&lhs, &rhs);
    solve.dc_policy_applied = rhs[0].norm() > super::DC_NEGLIGIBLE * rhs.iter().map(|v| v.norm()).fold(0.0, f64::max);
    Ok(NeumannResult {
        solve,
        trace,
        iterations,
        freeze_point,
        contraction_estimate: estimate,
    })
}

/// Summary of a Neumann run for reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeumannSummary {
    pub iterations: usize,
    pub residual: f64,
    pub contraction_estimate: f64,
    pub contraction_factor: f64,
    pub freeze_point: Vec<f64>,
    pub trace: Vec<f64>,
}

impl From<&NeumannResult> for NeumannSummary {
    fn from(r: &NeumannResult) -> Self {
        Self {
            iterations: r.iterations,
            residual: r.solve.residual,
            contraction_estimate: r.contraction_estimate,
            contraction_factor: r.contraction_factor(),
            freeze_point: r.freeze_point.clone(),
            trace: r.trace.clone(),
        }
    }
}
