use serde::Serialize;

use crate::error::{Error, Result};

const EXACT_MATCH: f64 = 1e-12;
const CLOSED_FORM_NODES: usize = 4000;

/// Function known at finitely many radii, linear in between.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledFunction {
    points: Vec<(f64, f64)>,
}

impl SampledFunction {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.is_empty() || points[0].0 <= 0.0 {
            return Err(Error::Domain("tables need positive sample radii".into()));
        }
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Domain("duplicate sample radius".into()));
        }
        if points.iter().any(|p| !p.1.is_finite()) {
            return Err(Error::Domain("table values must be finite".into()));
        }
        Ok(Self { points })
    }

    pub fn from_fn(radii: &[f64], f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(radii.iter().map(|&r| (r, f(r))).collect())
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        let pts = &self.points;
        let k = pts.partition_point(|p| p.0 < x);
        for j in [k.wrapping_sub(1), k] {
            if let Some(p) = pts.get(j) {
                if (p.0 - x).abs() <= EXACT_MATCH * x.abs() {
                    return Ok(p.1);
                }
            }
        }
        if k == 0 || k == pts.len() {
            return Err(Error::Domain(format!(
                "radius {x:e} outside the table range [{:e}, {:e}]",
                pts[0].0,
                pts[pts.len() - 1].0
            )));
        }
        let (a, b) = (pts[k - 1], pts[k]);
        Ok(a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0))
    }

    fn range(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }
}

/// Outcome of iterating `phi(tau R) <= tau^gamma phi(R) + psi(R)` from `R0`
/// down to `r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbsorptionReport {
    /// `k` with `tau^(k+1) R0 < r <= tau^k R0`.
    pub steps: usize,
    /// `B_0 = phi(R0)`, `B_{j+1} = tau^gamma B_j + psi(tau^j R0)`.
    pub trajectory: Vec<f64>,
    /// `B_k`, the bound on `phi(tau^k R0)`.
    pub bound: f64,
    /// `A B_k`, the bound on `phi(r)` under quasi-monotonicity.
    pub bound_at_r: f64,
    /// `(r/R0)^gamma phi(R0) + r^gamma int_r^R0 psi(rho) rho^(-gamma-1) drho`.
    pub closed_form: f64,
    pub hypothesis_holds: bool,
    /// Table radii `R` where `A^-1 phi(tau R) <= phi(s) <= A phi(R)` fails
    /// for some tabulated `s` in `[tau R, R]`.
    pub violations: Vec<f64>,
}

fn quasi_monotone_violations(phi: &SampledFunction, tau: f64, a: f64) -> Vec<f64> {
    let pts = phi.points();
    let mut out = Vec::new();
    for &(big, v_big) in pts {
        let Ok(v_low) = phi.value(tau * big) else { continue };
        let bad = pts
            .iter()
            .filter(|(s, _)| *s >= tau * big * (1.0 - EXACT_MATCH) && *s <= big)
            .any(|&(_, v)| v > a * v_big * (1.0 + EXACT_MATCH) || v < v_low / a * (1.0 - EXACT_MATCH));
        if bad {
            out.push(big);
        }
    }
    out
}

fn tail_integral(psi: &SampledFunction, gamma: f64, r: f64, r0: f64) -> Result<f64> {
    if r >= r0 {
        return Ok(0.0);
    }
    let span = (r0 / r).ln();
    let h = span / CLOSED_FORM_NODES as f64;
    let g = |t: f64| -> Result<f64> {
        let rho = r * t.exp();
        Ok(psi.value(rho.min(r0))? * rho.powf(-gamma))
    };
    let mut acc = 0.5 * (g(0.0)? + g(span)?);
    for i in 1..CLOSED_FORM_NODES {
        acc += g(h * i as f64)?;
    }
    Ok(acc * h)
}

/// Unrolls the absorption recursion exactly as in the iteration argument,
/// and evaluates the integral form of the resulting bound with constant 1.
#[allow(clippy::too_many_arguments)]
pub fn absorption_iterate(
    phi: &SampledFunction,
    psi: &SampledFunction,
    tau: f64,
    gamma: f64,
    a: f64,
    r: f64,
    r0: f64,
) -> Result<AbsorptionReport> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Domain(format!("tau must lie in (0, 1), got {tau}")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Domain(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    if !(a >= 1.0) {
        return Err(Error::Domain(format!("A must be at least 1, got {a}")));
    }
    if !(r > 0.0 && r <= r0) {
        return Err(Error::Domain(format!("need 0 < r <= R0, got r = {r}, R0 = {r0}")));
    }
    let (lo, _) = psi.range();
    let mut steps = 0usize;
    let mut scale = r0;
    while tau * scale >= r * (1.0 - EXACT_MATCH) {
        scale *= tau;
        steps += 1;
    }
    let contraction = tau.powf(gamma);
    let mut trajectory = Vec::with_capacity(steps + 1);
    let mut b = phi.value(r0)?;
    trajectory.push(b);
    let mut radius = r0;
    for _ in 0..steps {
        b = contraction * b + psi.value(radius)?;
        trajectory.push(b);
        radius *= tau;
    }
    if r < lo * (1.0 - EXACT_MATCH) {
        return Err(Error::Domain(format!("psi table starts at {lo:e}, above r = {r:e}")));
    }
    let closed_form = (r / r0).powf(gamma) * phi.value(r0)? + r.powf(gamma) * tail_integral(psi, gamma, r, r0)?;
    let violations = quasi_monotone_violations(phi, tau, a);
    Ok(AbsorptionReport {
        steps,
        bound: b,
        bound_at_r: a * b,
        trajectory,
        closed_form,
        hypothesis_holds: violations.is_empty(),
        violations,
    })
}
