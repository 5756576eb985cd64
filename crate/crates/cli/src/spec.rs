//! Problem specification files: JSON with unknown keys rejected, defaulted
//! in place so the resolved document can be echoed into every output.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::path::Path;

use kappa_core::dyadic_decomposition::default_mihlin_resolution;
use kappa_core::estimate_harness::{Problem, DEFAULT_TRUSTED_SPACINGS};
use kappa_core::index_algebra::{IndexSetPair, KappaWeight, DEFAULT_SEED};
use kappa_core::spectral_solver::{
    forward_apply, NeumannOptions, TrigPolynomial, TrigTerm, DEFAULT_CONTRACTION_THRESHOLD, DEFAULT_RESIDUAL_TOL,
};
use kappa_core::symbol_analysis::{KappaSphere, TermKey, DEFAULT_REFINE_ITERS};
use kappa_core::{Coefficient, GridField, GridSpec, MultiIndex, OperatorSpec};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiMultiple {
    pub pi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiSquaredMultiple {
    pub pi_squared: f64,
}

/// A real number, written either literally or as a multiple of `pi` or `pi^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Real {
    Number(f64),
    Pi(PiMultiple),
    PiSquared(PiSquaredMultiple),
}

impl Real {
    pub fn value(self) -> f64 {
        match self {
            Real::Number(v) => v,
            Real::Pi(p) => p.pi * PI,
            Real::PiSquared(p) => p.pi_squared * PI * PI,
        }
    }
}

/// Complex constant as `[re, im]`, or a real number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Pair([Real; 2]),
    Real(Real),
}

impl ComplexValue {
    pub fn value(self) -> Complex64 {
        match self {
            ComplexValue::Pair([re, im]) => Complex64::new(re.value(), im.value()),
            ComplexValue::Real(r) => Complex64::new(r.value(), 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpTerm {
    pub freq: Vec<i64>,
    pub amp: ComplexValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosTerm {
    pub freq: Vec<i64>,
    pub amp: Real,
    #[serde(default = "zero_real")]
    pub phase: Real,
}

fn zero_real() -> Real {
    Real::Number(0.0)
}

/// Trigonometric polynomial on the lattice: `mean + sum amp e^{i k.x}
/// + sum amp cos(k.x + phase)`, with `k.x = sum 2 pi k_l x_l / L_l`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    #[serde(default)]
    pub mean: Option<ComplexValue>,
    #[serde(default)]
    pub terms: Vec<ExpTerm>,
    #[serde(default)]
    pub cos: Vec<CosTerm>,
}

impl FieldSpec {
    pub fn polynomial(&self, dim: usize) -> Result<TrigPolynomial, CliError> {
        let mut terms: Vec<TrigTerm> = Vec::new();
        if let Some(m) = self.mean {
            terms.push(TrigTerm {
                freq: vec![0; dim],
                amp: m.value(),
            });
        }
        for t in &self.terms {
            check_freq(&t.freq, dim)?;
            terms.push(TrigTerm {
                freq: t.freq.clone(),
                amp: t.amp.value(),
            });
        }
        for c in &self.cos {
            check_freq(&c.freq, dim)?;
        }
        let cos = TrigPolynomial::real_cos(
            self.cos
                .iter()
                .map(|c| (c.freq.clone(), c.amp.value(), c.phase.value()))
                .collect(),
        );
        terms.extend(cos.terms);
        Ok(TrigPolynomial::new(terms))
    }

    pub fn sample(&self, grid: &GridSpec) -> Result<GridField, CliError> {
        let p = self.polynomial(grid.dim())?;
        p.check_resolved(grid)?;
        Ok(p.sample(grid))
    }
}

fn check_freq(freq: &[i64], dim: usize) -> Result<(), CliError> {
    if freq.len() != dim {
        return Err(CliError::Input(format!(
            "frequency {freq:?} has {} entries, the grid has dimension {dim}",
            freq.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexSets {
    #[serde(rename = "B")]
    pub b: Vec<MultiIndex>,
    pub m: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum CoefficientValue {
    Constant(ComplexValue),
    Field(FieldSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    pub alpha: MultiIndex,
    pub beta: MultiIndex,
    pub value: CoefficientValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSection {
    pub coefficients: Vec<CoefficientSpec>,
    #[serde(default)]
    pub lower_order: Vec<CoefficientSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhsTerm {
    pub beta: MultiIndex,
    pub field: FieldSpec,
}

/// `f_beta` given directly, or generated as `P u` from a manufactured `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum RhsSection {
    Fields(Vec<RhsTerm>),
    ManufacturedSolution(FieldSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub sizes: Vec<usize>,
    pub periods: Vec<Real>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSymbolOptions {
    pub resolution: Option<usize>,
    pub refine_iters: Option<usize>,
    pub homogeneity_trials: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionMultiplier {
    pub alpha: MultiIndex,
    pub beta: MultiIndex,
}

/// Multiplier whose Mihlin table is computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum MultiplierSpec {
    /// `m = 1`.
    One,
    /// `(i xi)^alpha (i xi)^beta / p(xi)`.
    Solution(SolutionMultiplier),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeOptions {
    pub multiplier: Option<MultiplierSpec>,
    pub gammas: Option<Vec<MultiIndex>>,
    /// Inclusive range of `j` with `R = 2^j`.
    pub shells: Option<[i32; 2]>,
    pub resolution: Option<usize>,
    pub max_gamma_order: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveOptions {
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub contraction_threshold: Option<f64>,
    pub freeze: Option<Vec<Real>>,
    pub residual_tol: Option<f64>,
    /// Derivatives written besides those in `A`.
    pub extra_targets: Option<Vec<MultiIndex>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleUnit {
    Absolute,
    /// Multiples of the largest periodic kappa-distance.
    GridRadius,
    /// Multiples of the smallest kappa-distance between grid points.
    Spacing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogSpaced {
    pub from: f64,
    pub to: f64,
    pub count: usize,
    pub unit: ScaleUnit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum ScaleList {
    Values(Vec<f64>),
    LogSpaced(LogSpaced),
}

impl ScaleList {
    pub fn resolve(&self, grid_radius: f64, spacing: f64) -> Result<Vec<f64>, CliError> {
        match self {
            ScaleList::Values(v) => Ok(v.clone()),
            ScaleList::LogSpaced(l) => {
                let unit = match l.unit {
                    ScaleUnit::Absolute => 1.0,
                    ScaleUnit::GridRadius => grid_radius,
                    ScaleUnit::Spacing => spacing,
                };
                if !(l.from > 0.0 && l.to >= l.from) || l.count == 0 {
                    return Err(CliError::Input(format!(
                        "log_spaced needs 0 < from <= to and count >= 1, got {l:?}"
                    )));
                }
                Ok(kappa_core::oscillation_metrics::log_spaced(l.from * unit, l.to * unit, l.count))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyOptions {
    pub r: Option<ScaleList>,
    pub theta: Option<f64>,
    pub gamma: Option<f64>,
    pub trusted_spacings: Option<f64>,
    pub outer_radius: Option<f64>,
    /// Sobolev exponents `p`, `q`.
    pub p: Option<f64>,
    pub q: Option<f64>,
    /// Decay radii and exponent for the Campanato study.
    pub campanato_radii: Option<ScaleList>,
    pub campanato_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: Option<u64>,
    #[serde(default)]
    pub check_symbol: CheckSymbolOptions,
    #[serde(default)]
    pub decompose: DecomposeOptions,
    #[serde(default)]
    pub solve: SolveOptions,
    #[serde(default)]
    pub verify: VerifyOptions,
}

/// Top-level problem specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpecFile {
    pub name: String,
    pub kappa: KappaWeight,
    pub index_sets: IndexSets,
    pub operator: OperatorSection,
    #[serde(default)]
    pub rhs: Option<RhsSection>,
    pub grid: GridSection,
    #[serde(default)]
    pub run: RunSection,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    /// Sphere or quadrature resolution for the symbol commands.
    pub resolution: Option<usize>,
    /// Points per axis for the grid commands.
    pub grid_size: Option<usize>,
}

pub fn load(path: &Path) -> Result<ProblemSpecFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

impl ProblemSpecFile {
    pub fn dim(&self) -> usize {
        self.kappa.dim()
    }

    /// Fills every defaulted parameter, so the serialized document states
    /// all seeds, resolutions and tolerances in effect.
    pub fn resolve(&mut self, ov: Overrides) -> Result<(), CliError> {
        let n = self.dim();
        if let Some(s) = ov.grid_size {
            self.grid.sizes = vec![s; n];
        }
        let run = &mut self.run;
        if ov.seed.is_some() {
            run.seed = ov.seed;
        }
        run.seed.get_or_insert(DEFAULT_SEED);

        let cs = &mut run.check_symbol;
        if ov.resolution.is_some() {
            cs.resolution = ov.resolution;
        }
        cs.resolution.get_or_insert(KappaSphere::default_resolution(n));
        cs.refine_iters.get_or_insert(DEFAULT_REFINE_ITERS);
        cs.homogeneity_trials.get_or_insert(256);

        let dec = &mut run.decompose;
        if ov.resolution.is_some() {
            dec.resolution = ov.resolution;
        }
        dec.resolution.get_or_insert(default_mihlin_resolution(n));
        dec.shells.get_or_insert([-5, 4]);
        dec.max_gamma_order.get_or_insert(4);
        dec.gammas.get_or_insert_with(|| vec![MultiIndex::zero(n)]);
        if dec.multiplier.is_none() {
            let b = self.index_sets.b.first().cloned().unwrap_or_else(|| MultiIndex::zero(n));
            let pair = IndexSetPair::from_b(self.index_sets.b.iter().cloned().collect(), self.index_sets.m, self.kappa.clone())?;
            let alpha = pair.a().iter().next().cloned().expect("A is nonempty");
            dec.multiplier = Some(MultiplierSpec::Solution(SolutionMultiplier { alpha, beta: b }));
        }

        let defaults = NeumannOptions::default();
        let sol = &mut run.solve;
        sol.max_iters.get_or_insert(defaults.max_iters);
        sol.tol.get_or_insert(defaults.tol);
        sol.contraction_threshold.get_or_insert(DEFAULT_CONTRACTION_THRESHOLD);
        sol.residual_tol.get_or_insert(DEFAULT_RESIDUAL_TOL);
        sol.extra_targets.get_or_insert_with(|| vec![MultiIndex::zero(n)]);

        let v = &mut run.verify;
        v.r.get_or_insert(ScaleList::LogSpaced(LogSpaced {
            from: 0.0025,
            to: 0.25,
            count: 9,
            unit: ScaleUnit::GridRadius,
        }));
        v.theta.get_or_insert(0.5);
        v.gamma.get_or_insert(0.5);
        v.trusted_spacings.get_or_insert(DEFAULT_TRUSTED_SPACINGS);
        v.p.get_or_insert(2.0);
        v.q.get_or_insert(2.0);
        v.campanato_radii.get_or_insert(ScaleList::LogSpaced(LogSpaced {
            from: 4.0,
            to: 16.0,
            count: 5,
            unit: ScaleUnit::Spacing,
        }));
        v.campanato_p.get_or_insert(2.0);
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.run.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn grid(&self) -> Result<GridSpec, CliError> {
        if self.grid.sizes.len() != self.dim() || self.grid.periods.len() != self.dim() {
            return Err(CliError::Input(format!(
                "grid needs {} sizes and periods, got {} and {}",
                self.dim(),
                self.grid.sizes.len(),
                self.grid.periods.len()
            )));
        }
        Ok(GridSpec::new(
            self.grid.sizes.clone(),
            self.grid.periods.iter().map(|p| p.value()).collect(),
        )?)
    }

    fn coefficient_map(&self, list: &[CoefficientSpec]) -> Result<BTreeMap<TermKey, Coefficient>, CliError> {
        let mut out = BTreeMap::new();
        for c in list {
            let value = match &c.value {
                CoefficientValue::Constant(v) => Coefficient::Constant(v.value()),
                CoefficientValue::Field(f) => Coefficient::Field(f.sample(&self.grid()?)?),
            };
            if out.insert((c.alpha.clone(), c.beta.clone()), value).is_some() {
                return Err(CliError::Input(format!("duplicate coefficient ({}, {})", c.alpha, c.beta)));
            }
        }
        Ok(out)
    }

    pub fn operator(&self) -> Result<OperatorSpec, CliError> {
        let pair = IndexSetPair::from_b(
            self.index_sets.b.iter().cloned().collect(),
            self.index_sets.m,
            self.kappa.clone(),
        )?;
        let coeffs = self.coefficient_map(&self.operator.coefficients)?;
        let lower = self.coefficient_map(&self.operator.lower_order)?;
        Ok(OperatorSpec::new(pair, coeffs, lower)?)
    }

    /// Right-hand side fields and the manufactured solution, if any. A spec
    /// without an `rhs` section solves `P u = 0`.
    pub fn rhs(
        &self,
        op: &OperatorSpec,
        grid: &GridSpec,
    ) -> Result<(BTreeMap<MultiIndex, GridField>, Option<TrigPolynomial>), CliError> {
        match &self.rhs {
            None => {
                let beta = op.index_pair().b().iter().next().expect("B is nonempty").clone();
                Ok((BTreeMap::from([(beta, GridField::zeros(grid))]), None))
            }
            Some(RhsSection::Fields(list)) => {
                let mut out = BTreeMap::new();
                for t in list {
                    if out.insert(t.beta.clone(), t.field.sample(grid)?).is_some() {
                        return Err(CliError::Input(format!("duplicate right-hand side index {}", t.beta)));
                    }
                }
                if out.is_empty() {
                    let beta = op.index_pair().b().iter().next().expect("B is nonempty").clone();
                    out.insert(beta, GridField::zeros(grid));
                }
                Ok((out, None))
            }
            Some(RhsSection::ManufacturedSolution(u)) => {
                let poly = u.polynomial(grid.dim())?;
                poly.check_resolved(grid)?;
                Ok((forward_apply(op, &poly.sample(grid))?, Some(poly)))
            }
        }
    }

    pub fn neumann_options(&self) -> NeumannOptions {
        let s = &self.run.solve;
        let d = NeumannOptions::default();
        NeumannOptions {
            freeze: s.freeze.as_ref().map(|x| x.iter().map(|v| v.value()).collect()),
            max_iters: s.max_iters.unwrap_or(d.max_iters),
            tol: s.tol.unwrap_or(d.tol),
            contraction_threshold: s.contraction_threshold.unwrap_or(d.contraction_threshold),
            extra_targets: BTreeSet::new(),
        }
    }

    /// Harness problem with the verify parameters applied.
    pub fn problem(&self) -> Result<Problem, CliError> {
        let op = self.operator()?;
        let grid = self.grid()?;
        let (rhs, manufactured) = self.rhs(&op, &grid)?;
        if op.has_lower_order() {
            return Err(CliError::Input("verification runs take principal operators only".into()));
        }
        let mut p = Problem::new(self.name.clone(), op, rhs)?;
        p.manufactured = manufactured;
        let v = &self.run.verify;
        p.theta = v.theta.unwrap_or(p.theta);
        p.gamma = v.gamma.unwrap_or(p.gamma);
        p.trusted_spacings = v.trusted_spacings.unwrap_or(p.trusted_spacings);
        p.outer_radius = v.outer_radius;
        p.neumann = self.neumann_options();
        Ok(p)
    }
}
