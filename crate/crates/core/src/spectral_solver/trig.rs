use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use super::grid::{GridField, GridSpec};
use super::spectral_derivative;
use crate::error::{check_dim, Error, Result};
use crate::index_algebra::MultiIndex;
use crate::symbol_analysis::{Coefficient, OperatorSpec};

/// `amp * exp(i sum_l 2 pi freq_l x_l / period_l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigTerm {
    pub freq: Vec<i64>,
    pub amp: Complex64,
}

/// Finite sum of lattice exponentials; exact on any grid that resolves
/// every frequency below its Nyquist index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrigPolynomial {
    pub terms: Vec<TrigTerm>,
}

impl TrigPolynomial {
    pub fn new(terms: Vec<TrigTerm>) -> Self {
        Self { terms }
    }

    /// `sum a cos(k . x + phase)` from `(k, a, phase)` triples.
    pub fn real_cos(parts: Vec<(Vec<i64>, f64, f64)>) -> Self {
        let mut terms = Vec::with_capacity(2 * parts.len());
        for (k, a, phase) in parts {
            let neg: Vec<i64> = k.iter().map(|v| -v).collect();
            terms.push(TrigTerm {
                freq: k,
                amp: Complex64::from_polar(0.5 * a, phase),
            });
            terms.push(TrigTerm {
                freq: neg,
                amp: Complex64::from_polar(0.5 * a, -phase),
            });
        }
        Self { terms }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest `|freq_l|` per axis.
    pub fn band(&self, n: usize) -> Vec<i64> {
        let mut out = vec![0; n];
        for t in &self.terms {
            for (l, k) in t.freq.iter().enumerate().take(n) {
                out[l] = out[l].max(k.abs());
            }
        }
        out
    }

    /// Every frequency lies strictly below the Nyquist index of `spec`.
    pub fn check_resolved(&self, spec: &GridSpec) -> Result<()> {
        for t in &self.terms {
            check_dim(spec.dim(), t.freq.len())?;
        }
        let band = self.band(spec.dim());
        for (l, (&b, &s)) in band.iter().zip(spec.sizes()).enumerate() {
            if 2 * b as usize >= s {
                return Err(Error::Domain(format!(
                    "frequency {b} on axis {l} is not resolved by {s} samples"
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64], periods: &[f64]) -> Complex64 {
        self.terms
            .iter()
            .map(|t| {
                let phase: f64 = t
                    .freq
                    .iter()
                    .zip(x)
                    .zip(periods)
                    .map(|((&k, &x), &p)| 2.0 * PI * k as f64 * x / p)
                    .sum();
                t.amp * Complex64::from_polar(1.0, phase)
            })
            .sum()
    }

    pub fn sample(&self, spec: &GridSpec) -> GridField {
        let periods = spec.periods().to_vec();
        GridField::from_fn(spec, |x| self.eval(x, &periods))
    }

    /// `D^gamma` of the polynomial for the given periods.
    pub fn derivative(&self, gamma: &MultiIndex, periods: &[f64]) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let mut amp = t.amp;
                for (l, &k) in t.freq.iter().enumerate() {
                    let ik = Complex64::new(0.0, 2.0 * PI * k as f64 / periods[l]);
                    amp *= ik.powu(gamma.get(l));
                }
                TrigTerm {
                    freq: t.freq.clone(),
                    amp,
                }
            })
            .filter(|t| t.amp.norm() > 0.0)
            .collect();
        Self { terms }
    }
}

/// Right-hand side in divergence form: `f_beta = sum_alpha a_{alpha beta} D^alpha u`,
/// so that `P u = sum_beta D^beta f_beta`. Lower-order terms join the map
/// under their own `beta`.
pub fn forward_apply(op: &OperatorSpec, u: &GridField) -> Result<BTreeMap<MultiIndex, GridField>> {
    check_dim(op.dim(), u.spec().dim())?;
    if let Some(g) = op.coefficient_grid() {
        g.check_same(u.spec())?;
    }
    let mut derivs: BTreeMap<MultiIndex, GridField> = BTreeMap::new();
    let mut out: BTreeMap<MultiIndex, GridField> = BTreeMap::new();
    for ((alpha, beta), c) in op.coeffs().iter().chain(op.lower_order()) {
        if !derivs.contains_key(alpha) {
            derivs.insert(alpha.clone(), spectral_derivative(u, alpha)?);
        }
        let d = &derivs[alpha];
        let term = match c {
            Coefficient::Constant(a) => d.scale(*a),
            Coefficient::Field(a) => a.mul(d)?,
        };
        let acc = match out.remove(beta) {
            Some(prev) => prev.add(&term)?,
            None => term,
        };
        out.insert(beta.clone(), acc);
    }
    Ok(out)
}
