//! End-to-end measurements of the interior estimates: solve a problem on the
//! torus, measure both sides of an inequality, report their ratio.

mod absorption;
mod decay;
mod verify;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

pub use absorption::{absorption_iterate, AbsorptionReport, SampledFunction};
pub use decay::{campanato_decay, decay_centers, log_log_slope, taylor_project, DecayBranch, DecayTable, TaylorProjection};
pub use verify::{
    global_terms, variable_terms, verify_global, verify_sobolev, verify_variable, SobolevRegime,
    PROFILE_BINS,
};

use crate::error::{check_dim, Error, Result};
use crate::index_algebra::MultiIndex;
use crate::oscillation_metrics::{max_periodic_distance, min_grid_distance};
use crate::spectral_solver::{
    forward_apply, solve_constant_for, solve_variable_neumann, GridField, GridSpec, NeumannOptions, NeumannSummary,
    TrigPolynomial,
};
use crate::symbol_analysis::OperatorSpec;

/// Reports at scales below this many grid spacings are suppressed.
pub const DEFAULT_TRUSTED_SPACINGS: f64 = 8.0;

/// An operator, right-hand side and grid, plus the parameters used by the
/// estimate measurements.
#[derive(Debug, Clone)]
pub struct Problem {
    pub label: String,
    pub op: OperatorSpec,
    pub grid: GridSpec,
    /// `f_beta` of `P u = sum_beta D^beta f_beta`.
    pub rhs: BTreeMap<MultiIndex, GridField>,
    pub manufactured: Option<TrigPolynomial>,
    pub theta: f64,
    pub gamma: f64,
    /// Radii for decay studies.
    pub radii: Vec<f64>,
    /// Outer radius `R0`; `None` uses the largest periodic distance.
    pub outer_radius: Option<f64>,
    pub trusted_spacings: f64,
    pub neumann: NeumannOptions,
}

impl Problem {
    pub fn new(label: impl Into<String>, op: OperatorSpec, rhs: BTreeMap<MultiIndex, GridField>) -> Result<Self> {
        let Some(first) = rhs.values().next() else {
            return Err(Error::Domain("problem needs at least one right-hand side field".into()));
        };
        let grid = first.spec().clone();
        check_dim(op.dim(), grid.dim())?;
        for (beta, f) in &rhs {
            grid.check_same(f.spec())?;
            if !op.index_pair().b().contains(beta) {
                return Err(Error::Contract(format!("right-hand side index {beta} is not in B")));
            }
        }
        if let Some(g) = op.coefficient_grid() {
            grid.check_same(g)?;
        }
        Ok(Self {
            label: label.into(),
            op,
            grid,
            rhs,
            manufactured: None,
            theta: 0.5,
            gamma: 0.5,
            radii: Vec::new(),
            outer_radius: None,
            trusted_spacings: DEFAULT_TRUSTED_SPACINGS,
            neumann: NeumannOptions::default(),
        })
    }

    /// Problem whose right-hand side is `P u` for a trigonometric `u`.
    pub fn manufactured(label: impl Into<String>, op: OperatorSpec, u: TrigPolynomial, grid: &GridSpec) -> Result<Self> {
        u.check_resolved(grid)?;
        let rhs = forward_apply(&op, &u.sample(grid))?;
        let mut p = Self::new(label, op, rhs)?;
        p.manufactured = Some(u);
        Ok(p)
    }

    /// Largest periodic kappa-distance of the grid.
    pub fn grid_radius(&self) -> f64 {
        max_periodic_distance(&self.grid, self.op.kappa())
    }

    pub fn outer_radius(&self) -> f64 {
        self.outer_radius.unwrap_or_else(|| self.grid_radius())
    }

    /// Smallest kappa-distance between grid points.
    pub fn spacing(&self) -> f64 {
        min_grid_distance(&self.grid, self.op.kappa())
    }

    pub fn min_trusted_scale(&self) -> f64 {
        self.trusted_spacings * self.spacing()
    }

    /// Center of the fundamental cell.
    pub fn center(&self) -> Vec<f64> {
        self.grid.periods().iter().map(|p| p / 2.0).collect()
    }

    /// Solves for `D^alpha u`, `alpha` in `A`, plus `extra`.
    pub fn solve(&self, extra: &BTreeSet<MultiIndex>) -> Result<Solution> {
        if self.op.has_lower_order() {
            return Err(Error::Contract("the harness solves principal operators only".into()));
        }
        let mut targets = self.op.index_pair().a().clone();
        targets.extend(extra.iter().cloned());
        if self.op.is_constant() {
            let s = solve_constant_for(&self.op, &self.rhs, &targets)?;
            Ok(Solution {
                derivatives: s.derivatives,
                residual: s.residual,
                neumann: None,
            })
        } else {
            let mut opts = self.neumann.clone();
            opts.extra_targets.extend(targets);
            let n = solve_variable_neumann(&self.op, &self.rhs, &opts)?;
            let summary = NeumannSummary::from(&n);
            Ok(Solution {
                derivatives: n.solve.derivatives,
                residual: n.solve.residual,
                neumann: Some(summary),
            })
        }
    }

    fn metadata(&self) -> ReportMeta {
        ReportMeta {
            operator: self.label.clone(),
            grid: self
                .grid
                .sizes()
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join("x"),
        }
    }
}

/// Derivative fields of a solved problem.
#[derive(Debug, Clone)]
pub struct Solution {
    pub derivatives: BTreeMap<MultiIndex, GridField>,
    pub residual: f64,
    pub neumann: Option<NeumannSummary>,
}

impl Solution {
    /// Fields for the indices in `set`, in order.
    pub fn select(&self, set: &BTreeSet<MultiIndex>) -> BTreeMap<MultiIndex, GridField> {
        set.iter()
            .filter_map(|a| self.derivatives.get(a).map(|f| (a.clone(), f.clone())))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportMeta {
    pub operator: String,
    pub grid: String,
}

/// One measured inequality `lhs <= C sum(rhs_terms)` at scale `r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub kind: String,
    #[serde(flatten)]
    pub meta: ReportMeta,
    pub r: f64,
    pub lhs: f64,
    pub rhs_terms: BTreeMap<String, f64>,
    /// `lhs / sum(rhs_terms)`; withheld when the sum vanishes or the scale
    /// is untrusted.
    #[serde(rename = "empirical_C")]
    pub empirical_c: Option<f64>,
    pub flags: Vec<String>,
    /// Auxiliary measurements (fitted exponents and the like).
    pub extras: BTreeMap<String, f64>,
}

pub const FLAG_RHS_ZERO: &str = "rhs_zero";
pub const FLAG_UNTRUSTED_SCALE: &str = "below_trusted_scale";

impl EstimateReport {
    fn new(kind: &str, meta: ReportMeta, r: f64, lhs: f64, rhs_terms: BTreeMap<String, f64>, trusted: bool) -> Self {
        let total: f64 = rhs_terms.values().sum();
        let mut flags = Vec::new();
        let mut empirical_c = None;
        if !trusted {
            flags.push(FLAG_UNTRUSTED_SCALE.to_string());
        }
        if !(total > 0.0) {
            flags.push(FLAG_RHS_ZERO.to_string());
        } else if trusted {
            empirical_c = Some(lhs / total);
        }
        Self {
            kind: kind.to_string(),
            meta,
            r,
            lhs,
            rhs_terms,
            empirical_c,
            flags,
            extras: BTreeMap::new(),
        }
    }

    pub fn rhs_total(&self) -> f64 {
        self.rhs_terms.values().sum()
    }

    /// CSV with one row per report; rhs columns are the union of term names.
    pub fn to_csv(reports: &[EstimateReport]) -> String {
        let terms: BTreeSet<&String> = reports.iter().flat_map(|r| r.rhs_terms.keys()).collect();
        let extras: BTreeSet<&String> = reports.iter().flat_map(|r| r.extras.keys()).collect();
        let mut s = String::from("kind,operator,grid,r,lhs");
        for t in &terms {
            let _ = write!(s, ",{t}");
        }
        s.push_str(",empirical_C");
        for e in &extras {
            let _ = write!(s, ",{e}");
        }
        s.push_str(",flags\n");
        for rep in reports {
            let _ = write!(s, "{},{},{},{:e},{:e}", rep.kind, rep.meta.operator, rep.meta.grid, rep.r, rep.lhs);
            for t in &terms {
                match rep.rhs_terms.get(*t) {
                    Some(v) => {
                        let _ = write!(s, ",{v:e}");
                    }
                    None => s.push(','),
                }
            }
            match rep.empirical_c {
                Some(c) => {
                    let _ = write!(s, ",{c:e}");
                }
                None => s.push(','),
            }
            for e in &extras {
                match rep.extras.get(*e) {
                    Some(v) => {
                        let _ = write!(s, ",{v:e}");
                    }
                    None => s.push(','),
                }
            }
            let _ = writeln!(s, ",{}", rep.flags.join(";"));
        }
        s
    }
}

/// `max C / min C` over reports carrying a constant; `None` if fewer than two.
pub fn constant_spread(reports: &[EstimateReport]) -> Option<f64> {
    let cs: Vec<f64> = reports.iter().filter_map(|r| r.empirical_c).collect();
    if cs.len() < 2 {
        return None;
    }
    let hi = cs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = cs.iter().copied().fold(f64::INFINITY, f64::min);
    Some(hi / lo)
}
