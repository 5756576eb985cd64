use std::collections::BTreeSet;
use std::fmt::Write as _;

use clap::ValueEnum;
use kappa_core::dyadic_decomposition::{mihlin_constant, MihlinEstimate};
use kappa_core::estimate_harness::{
    campanato_decay, constant_spread, verify_global, verify_sobolev, verify_variable, EstimateReport,
};
use kappa_core::spectral_solver::{
    solve_constant_for, solve_variable_neumann, write_grid, NeumannSummary, TrigPolynomial,
};
use kappa_core::symbol_analysis::{
    check_homogeneity, ellipticity_bounds, perturbation_radius, EllipticityBounds, HomogeneityCheck, RationalSymbol,
    SphereOptions,
};
use kappa_core::{Error, GridField, GridSpec, MultiIndex, OperatorSpec};
use serde::Serialize;

use crate::error::CliError;
use crate::output::Writer;
use crate::spec::{MultiplierSpec, ProblemSpecFile};

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(";")
}

/// Tag used in file names: `u` for the zero index, else `d2_0` style.
fn index_tag(a: &MultiIndex) -> String {
    if a.is_zero() {
        "u".into()
    } else {
        let parts: Vec<String> = a.exponents().iter().map(u32::to_string).collect();
        format!("d{}", parts.join("_"))
    }
}

#[derive(Debug, Serialize)]
pub struct SymbolReport {
    pub homogeneity: HomogeneityCheck,
    pub ellipticity: EllipticityBounds,
    /// Radius beyond which the lower-order part is absorbed; present when
    /// the operator has one.
    pub perturbation_radius: Option<f64>,
}

pub fn check_symbol(spec: &ProblemSpecFile, out: &Writer) -> Result<SymbolReport, CliError> {
    let op = spec.operator()?;
    let cs = &spec.run.check_symbol;
    let opts = SphereOptions {
        resolution: cs.resolution.expect("resolved"),
        refine_iters: cs.refine_iters.expect("resolved"),
        seed: spec.seed(),
    };
    // field coefficients: homogeneity is checked at the cell center
    let center: Option<Vec<f64>> = if op.is_constant() {
        None
    } else {
        Some(spec.grid()?.periods().iter().map(|p| p / 2.0).collect())
    };
    let homogeneity = check_homogeneity(&op, center.as_deref(), cs.homogeneity_trials.expect("resolved"), spec.seed())?;
    let ellipticity = ellipticity_bounds(&op, None, opts)?;
    let perturbation_radius = if op.has_lower_order() && op.is_constant() {
        Some(perturbation_radius(&op, &ellipticity, opts)?)
    } else {
        None
    };
    let report = SymbolReport {
        homogeneity,
        ellipticity,
        perturbation_radius,
    };
    let e = &report.ellipticity;
    println!("lambda = {:.6e}", e.lambda);
    println!("Lambda = {:.6e}", e.upper);
    println!("argmin xi = {:?}", e.argmin_xi);
    println!(
        "homogeneity: {} (max relative deviation {:.3e} over {} trials)",
        if homogeneity.passed { "pass" } else { "FAIL" },
        homogeneity.max_rel_deviation,
        homogeneity.trials
    );
    let mut csv = String::from("quantity,value\n");
    let _ = writeln!(csv, "lambda,{:e}", e.lambda);
    let _ = writeln!(csv, "Lambda,{:e}", e.upper);
    let _ = writeln!(csv, "argmin_xi,{}", join(&e.argmin_xi));
    let _ = writeln!(csv, "argmax_xi,{}", join(&e.argmax_xi));
    if let Some(x) = &e.argmin_x {
        let _ = writeln!(csv, "argmin_x,{}", join(x));
    }
    let _ = writeln!(csv, "sampling_resolution,{}", e.sampling_resolution);
    let _ = writeln!(csv, "homogeneity_passed,{}", homogeneity.passed);
    let _ = writeln!(csv, "homogeneity_max_rel_deviation,{:e}", homogeneity.max_rel_deviation);
    if let Some(c) = perturbation_radius {
        let _ = writeln!(csv, "perturbation_radius,{c:e}");
    }
    out.write_table(&format!("{}.check_symbol", spec.name), &csv, &report)?;
    Ok(report)
}

pub fn parse_gamma(s: &str) -> Result<MultiIndex, CliError> {
    let parts: Result<Vec<u32>, _> = s.split(',').map(|p| p.trim().parse::<u32>()).collect();
    parts
        .map(MultiIndex::new)
        .map_err(|e| CliError::Input(format!("bad multi-index {s:?}: {e}")))
}

fn multiplier(spec: &ProblemSpecFile, op: &OperatorSpec) -> Result<RationalSymbol, CliError> {
    match spec.run.decompose.multiplier.as_ref().expect("resolved") {
        MultiplierSpec::One => Ok(RationalSymbol::one(spec.dim())),
        MultiplierSpec::Solution(s) => {
            if !op.index_pair().a().contains(&s.alpha) || !op.index_pair().b().contains(&s.beta) {
                return Err(CliError::Input(format!("multiplier ({}, {}) is not in A x B", s.alpha, s.beta)));
            }
            Ok(RationalSymbol::solution_multiplier(&op.principal(), &s.alpha, &s.beta)?)
        }
    }
}

pub fn decompose(spec: &ProblemSpecFile, gammas: &[MultiIndex], out: &Writer) -> Result<Vec<MihlinEstimate>, CliError> {
    let op = spec.operator()?;
    let d = &spec.run.decompose;
    let max_order = d.max_gamma_order.expect("resolved");
    let list = if gammas.is_empty() {
        d.gammas.clone().expect("resolved")
    } else {
        gammas.to_vec()
    };
    for g in &list {
        if g.dim() != spec.dim() {
            return Err(CliError::Input(format!("gamma {g} has the wrong dimension")));
        }
        if g.order() > max_order {
            return Err(CliError::Input(format!(
                "gamma {g} has order {} beyond the configured maximum {max_order}",
                g.order()
            )));
        }
    }
    if !op.is_constant() {
        return Err(CliError::Input("decompose needs constant coefficients".into()));
    }
    let ms = multiplier(spec, &op)?;
    let [lo, hi] = d.shells.expect("resolved");
    let resolution = d.resolution.expect("resolved");
    let mut estimates = Vec::with_capacity(list.len());
    let mut csv = String::from("gamma,j,R,shell_integral,scaled_value\n");
    for g in &list {
        let est = mihlin_constant(&ms, &spec.kappa, g, lo..=hi, resolution)?;
        println!(
            "gamma {g}: A = {:.6e}, spread {:.3}%, {}",
            est.constant,
            100.0 * est.spread(),
            if est.converged { "converged" } else { "NOT converged at half resolution" }
        );
        let tag = g.exponents().iter().map(u32::to_string).collect::<Vec<_>>().join(";");
        for row in est.shells.iter() {
            let _ = writeln!(csv, "{tag},{},{:e},{:e},{:e}", row.j, row.radius, row.shell_integral, row.scaled_value);
        }
        estimates.push(est);
    }
    out.write_table(&format!("{}.mihlin", spec.name), &csv, &estimates)?;
    Ok(estimates)
}

#[derive(Debug, Serialize)]
pub struct FieldEntry {
    pub alpha: MultiIndex,
    pub file: String,
    pub sup_norm: f64,
}

#[derive(Debug, Serialize)]
pub struct SolveManifest {
    pub residual: f64,
    pub residual_tol: f64,
    pub dc_policy_applied: bool,
    pub fields: Vec<FieldEntry>,
    /// `max_alpha sup|D^alpha u - exact| / sup|exact|` for manufactured runs,
    /// means removed.
    pub recovery_error: Option<f64>,
    pub neumann: Option<NeumannSummary>,
}

fn recovery_error(
    u: &TrigPolynomial,
    grid: &GridSpec,
    derivs: &std::collections::BTreeMap<MultiIndex, GridField>,
) -> f64 {
    let centered = |f: &GridField| {
        let m = f.mean();
        f.map(|v| v - m)
    };
    let mut worst = 0.0f64;
    for (alpha, got) in derivs {
        let exact = centered(&u.derivative(alpha, grid.periods()).sample(grid));
        let got = centered(got);
        let scale = exact.sup_norm();
        let err = got.sub(&exact).expect("same grid").sup_norm();
        worst = worst.max(if scale > 0.0 { err / scale } else { err });
    }
    worst
}

pub fn solve(spec: &ProblemSpecFile, out: &Writer) -> Result<SolveManifest, CliError> {
    let op = spec.operator()?;
    let grid = spec.grid()?;
    let (rhs, manufactured) = spec.rhs(&op, &grid)?;
    let s = &spec.run.solve;
    let mut targets: BTreeSet<MultiIndex> = op.index_pair().a().clone();
    targets.extend(s.extra_targets.clone().expect("resolved"));
    let (result, neumann) = if op.is_constant() {
        (solve_constant_for(&op, &rhs, &targets)?, None)
    } else {
        let mut opts = spec.neumann_options();
        opts.extra_targets = targets.clone();
        let n = solve_variable_neumann(&op, &rhs, &opts)?;
        let summary = NeumannSummary::from(&n);
        (n.solve, Some(summary))
    };
    let residual_tol = s.residual_tol.expect("resolved");
    if !(result.residual <= residual_tol) {
        return Err(Error::Tolerance {
            what: "solve residual".into(),
            value: result.residual,
            limit: residual_tol,
        }
        .into());
    }
    let mut fields = Vec::new();
    for (alpha, f) in &result.derivatives {
        if !targets.contains(alpha) {
            continue;
        }
        let name = format!("{}.{}.akgf", spec.name, index_tag(alpha));
        let mut bytes = Vec::new();
        write_grid(f, &mut bytes)?;
        out.write_bytes(&name, &bytes)?;
        fields.push(FieldEntry {
            alpha: alpha.clone(),
            file: name,
            sup_norm: f.sup_norm(),
        });
    }
    let manifest = SolveManifest {
        residual: result.residual,
        residual_tol,
        dc_policy_applied: result.dc_policy_applied,
        recovery_error: manufactured.as_ref().map(|u| recovery_error(u, &grid, &result.derivatives)),
        fields,
        neumann,
    };
    println!("residual = {:.3e}", manifest.residual);
    if let Some(e) = manifest.recovery_error {
        println!("recovery error = {e:.3e}");
    }
    if let Some(n) = &manifest.neumann {
        println!(
            "neumann: {} iterations, contraction factor {:.3e} (a priori {:.3e})",
            n.iterations, n.contraction_factor, n.contraction_estimate
        );
    }
    out.write_json(&format!("{}.solve.json", spec.name), &manifest)?;
    Ok(manifest)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    Global,
    Variable,
    Sobolev,
    Campanato,
}

#[derive(Debug, Serialize)]
struct EstimateSummary<'a> {
    reports: &'a [EstimateReport],
    constant_spread: Option<f64>,
}

pub fn verify(spec: &ProblemSpecFile, which: Which, out: &Writer) -> Result<(), CliError> {
    let problem = spec.problem()?;
    let v = &spec.run.verify;
    let (big_r, h) = (problem.grid_radius(), problem.spacing());
    let stem = |k: &str| format!("{}.verify_{k}", spec.name);
    let emit = |k: &str, reports: &[EstimateReport]| -> Result<(), CliError> {
        for r in reports {
            println!(
                "r = {:.4e}  lhs = {:.4e}  rhs = {:.4e}  C = {}{}",
                r.r,
                r.lhs,
                r.rhs_total(),
                r.empirical_c.map_or("-".to_string(), |c| format!("{c:.4e}")),
                if r.flags.is_empty() { String::new() } else { format!("  [{}]", r.flags.join(", ")) }
            );
        }
        let spread = constant_spread(reports);
        if let Some(s) = spread {
            println!("max C / min C = {s:.4}");
        }
        let summary = EstimateSummary {
            reports,
            constant_spread: spread,
        };
        out.write_table(&stem(k), &EstimateReport::to_csv(reports), &summary)?;
        Ok(())
    };
    match which {
        Which::Global => {
            let rs = v.r.as_ref().expect("resolved").resolve(big_r, h)?;
            emit("global", &verify_global(&problem, &rs)?)
        }
        Which::Variable => {
            let rs = v.r.as_ref().expect("resolved").resolve(big_r, h)?;
            emit("variable", &verify_variable(&problem, &rs)?)
        }
        Which::Sobolev => {
            let rep = verify_sobolev(&problem, v.p.expect("resolved"), v.q.expect("resolved"))?;
            emit("sobolev", std::slice::from_ref(&rep))
        }
        Which::Campanato => {
            let radii = v.campanato_radii.as_ref().expect("resolved").resolve(big_r, h)?;
            let table = campanato_decay(&problem, &radii, v.campanato_p.expect("resolved"))?;
            println!(
                "fitted exponent {}  reference {:.4}  monotone {}",
                table.fitted_exponent.map_or("-".to_string(), |e| format!("{e:.4}")),
                table.reference_exponent,
                table.monotone
            );
            out.write_table(&stem("campanato"), &table.to_csv(), &table)?;
            Ok(())
        }
    }
}
