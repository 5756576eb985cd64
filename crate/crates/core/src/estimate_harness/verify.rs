use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{log_log_slope, EstimateReport, Problem};
use crate::error::{Error, Result};
use crate::index_algebra::{KappaWeight, MultiIndex};
use crate::oscillation_metrics::{
    default_centers, default_radii, dini_integrals, log_spaced, mean_oscillation_profile, region_profile, seminorm,
    Exponent, OscillationProfile, ProfileKind, Region,
};
use crate::spectral_solver::GridField;
use crate::symbol_analysis::Coefficient;

/// Radii tabulated for the moduli entering the Dini integrals.
pub const PROFILE_BINS: usize = 64;
/// Cap on the centers sampled by mean-oscillation profiles.
const MEAN_CENTERS: usize = 1024;
/// Scales used by the Hoelder-exponent fit of the Sobolev check.
const HOLDER_FIT_POINTS: usize = 12;

fn sorted_scales(r_values: &[f64]) -> Result<Vec<f64>> {
    let mut rs = r_values.to_vec();
    if rs.is_empty() || rs.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(Error::Domain("scales must be positive and finite".into()));
    }
    rs.sort_by(f64::total_cmp);
    rs.dedup();
    Ok(rs)
}

/// `max_alpha sup |D^alpha u(x) - D^alpha u(y)|` over pairs in `region`.
fn derivative_oscillation(
    derivs: &BTreeMap<MultiIndex, GridField>,
    kappa: &KappaWeight,
    region: &Region,
    rs: &[f64],
) -> Result<Vec<f64>> {
    let mut out = vec![0.0f64; rs.len()];
    for f in derivs.values() {
        let p = region_profile(f, kappa, region, rs)?;
        for (o, v) in out.iter_mut().zip(&p.values) {
            *o = o.max(*v);
        }
    }
    Ok(out)
}

/// Sup-oscillation modulus of the data, summed over `beta`.
fn data_profile(problem: &Problem) -> Result<OscillationProfile> {
    let kappa = problem.op.kappa();
    let radii = default_radii(&problem.grid, kappa, PROFILE_BINS);
    let mut values = vec![0.0; radii.len()];
    for f in problem.rhs.values() {
        let p = region_profile(f, kappa, &Region::Full, &radii)?;
        for (v, w) in values.iter_mut().zip(&p.values) {
            *v += w;
        }
    }
    OscillationProfile::new(radii, values, ProfileKind::SupOscillation)
}

/// Right-hand side of the constant-coefficient estimate at scale `r`.
pub fn global_terms(omega_f: &OscillationProfile, r: f64, big_r: f64) -> Result<BTreeMap<String, f64>> {
    let d = dini_integrals(omega_f, r, big_r, 1.0)?;
    Ok(BTreeMap::from([
        ("dini_small".to_string(), d.small_scale_integral),
        ("dini_tail".to_string(), d.tail_integral),
    ]))
}

/// Right-hand side of the variable-coefficient estimate at scale `r`;
/// `seminorm` is `[|u|]_{A, inf; B_R0}`.
pub fn variable_terms(
    omega_f: &OscillationProfile,
    omega_a: &OscillationProfile,
    seminorm: f64,
    r: f64,
    r0: f64,
    gamma: f64,
) -> Result<BTreeMap<String, f64>> {
    let f = dini_integrals(omega_f, r, r0, gamma)?;
    let a = dini_integrals(omega_a, r, r0, gamma)?;
    Ok(BTreeMap::from([
        ("seminorm".to_string(), seminorm * r.powf(gamma)),
        ("dini_small".to_string(), f.small_scale_integral),
        ("dini_tail".to_string(), f.tail_integral),
        ("coef_small".to_string(), seminorm * a.small_scale_integral),
        ("coef_tail".to_string(), seminorm * a.tail_integral),
    ]))
}

/// Constant-coefficient estimate at each scale in `r_values`: oscillation
/// of the top-order derivatives against the Dini integrals of `omega_f`
/// with tail exponent 1.
pub fn verify_global(problem: &Problem, r_values: &[f64]) -> Result<Vec<EstimateReport>> {
    if !problem.op.is_constant() {
        return Err(Error::Contract("verify_global needs constant coefficients".into()));
    }
    let rs = sorted_scales(r_values)?;
    let big_r = problem.grid_radius();
    let sol = problem.solve(&BTreeSet::new())?;
    let kappa = problem.op.kappa();
    let lhs = derivative_oscillation(&sol.select(problem.op.index_pair().a()), kappa, &Region::Full, &rs)?;
    let omega_f = data_profile(problem)?;
    let floor = problem.min_trusted_scale();
    rs.iter()
        .zip(lhs)
        .map(|(&r, l)| {
            let terms = global_terms(&omega_f, r, big_r)?;
            let mut rep = EstimateReport::new("global", problem.metadata(), r, l, terms, r >= floor);
            rep.extras.insert("residual".into(), sol.residual);
            Ok(rep)
        })
        .collect()
}

fn coefficient_fields(problem: &Problem) -> BTreeMap<String, GridField> {
    problem
        .op
        .coeffs()
        .iter()
        .filter_map(|((a, b), c)| match c {
            Coefficient::Field(f) => Some((format!("a{a}{b}"), f.clone())),
            Coefficient::Constant(_) => None,
        })
        .collect()
}

/// Variable-coefficient estimate on `B_{theta R0}`: all Dini terms of the
/// mean oscillations of data and coefficients, plus the seminorm term.
pub fn verify_variable(problem: &Problem, r_values: &[f64]) -> Result<Vec<EstimateReport>> {
    let rs = sorted_scales(r_values)?;
    let r0 = problem.outer_radius();
    let kappa = problem.op.kappa();
    let sol = problem.solve(&BTreeSet::new())?;
    let top = sol.select(problem.op.index_pair().a());
    let center = problem.center();
    let inner = Region::Ball {
        center: center.clone(),
        radius: problem.theta * r0,
    };
    let outer = Region::Ball { center, radius: r0 };
    let lhs = derivative_oscillation(&top, kappa, &inner, &rs)?;
    let semi = seminorm(&top, Exponent::Infinity, &outer, kappa)?;
    let radii = default_radii(&problem.grid, kappa, PROFILE_BINS);
    let centers = default_centers(&problem.grid, MEAN_CENTERS);
    let data: BTreeMap<String, GridField> = problem.rhs.iter().map(|(b, f)| (format!("f{b}"), f.clone())).collect();
    let omega_f = mean_oscillation_profile(&data, kappa, &radii, &centers)?;
    let coeffs = coefficient_fields(problem);
    let omega_a = if coeffs.is_empty() {
        OscillationProfile::from_fn(radii.clone(), ProfileKind::MeanOscillation, |_| 0.0)?
    } else {
        mean_oscillation_profile(&coeffs, kappa, &radii, &centers)?
    };
    let floor = problem.min_trusted_scale();
    rs.iter()
        .zip(lhs)
        .map(|(&r, l)| {
            let terms = variable_terms(&omega_f, &omega_a, semi, r, r0, problem.gamma)?;
            let mut rep = EstimateReport::new("variable", problem.metadata(), r, l, terms, r >= floor);
            rep.extras.insert("residual".into(), sol.residual);
            if let Some(n) = &sol.neumann {
                rep.extras.insert("contraction_factor".into(), n.contraction_factor);
                rep.extras.insert("iterations".into(), n.iterations as f64);
            }
            Ok(rep)
        })
        .collect()
}

/// Which half of the Sobolev-type statement applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SobolevRegime {
    /// `1 <= p < |kappa|`, `q < |kappa| p / (|kappa| - p)`.
    Integrability,
    /// `p > |kappa|`: continuity of the lower derivatives.
    Continuity,
}

impl SobolevRegime {
    pub fn classify(p: f64, q: f64, homogeneous_dim: f64) -> Result<Self> {
        if p >= 1.0 && p < homogeneous_dim {
            let q_max = homogeneous_dim * p / (homogeneous_dim - p);
            if q >= 1.0 && q < q_max {
                Ok(Self::Integrability)
            } else {
                Err(Error::Domain(format!("q = {q} outside [1, {q_max})")))
            }
        } else if p > homogeneous_dim && p.is_finite() {
            Ok(Self::Continuity)
        } else {
            Err(Error::Domain(format!("p = {p} is not admissible for |kappa| = {homogeneous_dim}")))
        }
    }
}

fn lp_norm(f: &GridField, p: f64, region: &Region, kappa: &KappaWeight) -> Result<f64> {
    let single = BTreeMap::from([(MultiIndex::zero(f.spec().dim()), f.clone())]);
    seminorm(&single, Exponent::new(p)?, region, kappa)
}

/// Lower-derivative bound on `B_{theta R0}` by the `A`-derivatives on
/// `B_R0`; for `p > |kappa|` also fits the Hoelder exponent of the lower
/// derivatives and records it next to both candidate exponents.
pub fn verify_sobolev(problem: &Problem, p: f64, q: f64) -> Result<EstimateReport> {
    let kappa = problem.op.kappa();
    let dim = kappa.total() as f64;
    let regime = SobolevRegime::classify(p, q, dim)?;
    let lower = problem.op.index_pair().lower();
    if lower.is_empty() {
        return Err(Error::Domain("the operator has no lower index set".into()));
    }
    let sol = problem.solve(&lower)?;
    let r0 = problem.outer_radius();
    let center = problem.center();
    let inner = Region::Ball {
        center: center.clone(),
        radius: problem.theta * r0,
    };
    let outer = Region::Ball { center, radius: r0 };
    let mut rhs = 0.0;
    for f in sol.select(problem.op.index_pair().a()).values() {
        rhs += lp_norm(f, p, &outer, kappa)?;
    }
    let lower_fields = sol.select(&lower);
    let mut lhs = 0.0f64;
    let mut extras = BTreeMap::new();
    match regime {
        SobolevRegime::Integrability => {
            for f in lower_fields.values() {
                lhs = lhs.max(lp_norm(f, q, &inner, kappa)?);
            }
        }
        SobolevRegime::Continuity => {
            let hi = problem.theta * r0;
            let lo = problem.spacing().min(hi / 2.0);
            let rs = log_spaced(lo, hi, HOLDER_FIT_POINTS);
            let osc = derivative_oscillation(&lower_fields, kappa, &inner, &rs)?;
            lhs = *osc.last().unwrap_or(&0.0);
            if let Some(s) = log_log_slope(&rs, &osc) {
                extras.insert("fitted_holder_exponent".into(), s);
            }
            extras.insert("printed_exponent".into(), 1.0 - p / dim);
            extras.insert("morrey_exponent".into(), 1.0 - dim / p);
        }
    }
    let terms = BTreeMap::from([("a_derivatives_lp".to_string(), rhs)]);
    let mut rep = EstimateReport::new("sobolev", problem.metadata(), problem.theta * r0, lhs, terms, true);
    rep.extras = extras;
    rep.extras.insert("p".into(), p);
    rep.extras.insert("q".into(), q);
    if regime == SobolevRegime::Continuity {
        rep.flags.push("holder_check_informational".into());
    }
    Ok(rep)
}
