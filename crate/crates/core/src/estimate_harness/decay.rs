use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;

use super::Problem;
use crate::error::{check_dim, Error, Result};
use crate::index_algebra::{KappaWeight, MultiIndex};
use crate::oscillation_metrics::{ball_indices, campanato_phi};
use crate::spectral_solver::{GridField, GridSpec};

/// Minimum number of radii for a decay fit.
pub const MIN_FIT_POINTS: usize = 3;
/// Relative drop tolerated before a decay table counts as non-monotone.
const MONOTONE_SLACK: f64 = 0.1;

/// Least-squares slope of `ln y` against `ln x` over the pairs with `y > 0`;
/// `None` with fewer than three usable pairs.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Grid center plus the four quarter points of the first two axes.
pub fn decay_centers(grid: &GridSpec) -> Vec<Vec<f64>> {
    let p = grid.periods();
    let mut out = vec![p.iter().map(|l| l / 2.0).collect::<Vec<f64>>()];
    for j in 0..4usize {
        let c: Vec<f64> = p
            .iter()
            .enumerate()
            .map(|(l, len)| {
                let upper = l < 2 && (j >> l) & 1 == 1;
                len * if upper { 0.75 } else { 0.25 }
            })
            .collect();
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

/// Quantity tabulated by [`campanato_decay`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayBranch {
    /// `phi_{A,p}(x0, r)` of the top-order derivatives, `p < 1`.
    Campanato,
    /// `|| u - (u)_{x0,r} ||_{p; B_r}`, `p >= 1`.
    MeanDeviation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayTable {
    pub p: f64,
    pub branch: DecayBranch,
    pub radii: Vec<f64>,
    pub centers: Vec<Vec<f64>>,
    /// `values[c][k]` at center `c` and radius `k`.
    pub values: Vec<Vec<f64>>,
    /// Log-log slope per center.
    pub exponents: Vec<Option<f64>>,
    /// Smallest slope over the centers.
    pub fitted_exponent: Option<f64>,
    /// `min kappa_l` for the Campanato branch, `|kappa|/p + min kappa_l` otherwise.
    pub reference_exponent: f64,
    /// Every column is non-decreasing in `r` up to a 10% drop.
    pub monotone: bool,
    /// True when some inner Campanato search hit its budget.
    pub search_unconverged: bool,
}

impl DecayTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r");
        for c in 0..self.centers.len() {
            let _ = write!(s, ",center_{c}");
        }
        s.push('\n');
        for (k, r) in self.radii.iter().enumerate() {
            let _ = write!(s, "{r:e}");
            for col in &self.values {
                let _ = write!(s, ",{:e}", col[k]);
            }
            s.push('\n');
        }
        s
    }
}

fn mean_deviation(f: &GridField, ball: &[usize], p: f64) -> f64 {
    let vals: Vec<Complex64> = ball.iter().map(|&i| f.values()[i]).collect();
    let mean = vals.iter().sum::<Complex64>() / vals.len() as f64;
    let cell = f.spec().cell_volume();
    (vals.iter().map(|v| (v - mean).norm().powf(p)).sum::<f64>() * cell).powf(1.0 / p)
}

/// Decay of the Campanato quantity (`p < 1`) or of the mean deviation of
/// `u` (`p >= 1`) over `radii` at the five [`decay_centers`].
pub fn campanato_decay(problem: &Problem, radii: &[f64], p: f64) -> Result<DecayTable> {
    if radii.len() < MIN_FIT_POINTS {
        return Err(Error::Domain(format!(
            "decay fit needs at least {MIN_FIT_POINTS} radii, got {}",
            radii.len()
        )));
    }
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::Domain(format!("exponent must be positive and finite, got {p}")));
    }
    let mut rs = radii.to_vec();
    rs.sort_by(f64::total_cmp);
    if rs[0] <= 0.0 || rs.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Domain("radii must be positive and distinct".into()));
    }
    let kappa = problem.op.kappa();
    let n = kappa.dim();
    let branch = if p < 1.0 { DecayBranch::Campanato } else { DecayBranch::MeanDeviation };
    let zero = MultiIndex::zero(n);
    let extra = match branch {
        DecayBranch::MeanDeviation => BTreeSet::from([zero.clone()]),
        DecayBranch::Campanato => BTreeSet::new(),
    };
    let sol = problem.solve(&extra)?;
    let top = sol.select(problem.op.index_pair().a());
    let centers = decay_centers(&problem.grid);
    let mut values = Vec::with_capacity(centers.len());
    let mut unconverged = false;
    for c in &centers {
        let mut col = Vec::with_capacity(rs.len());
        for &r in &rs {
            let v = match branch {
                DecayBranch::Campanato => {
                    let phi = campanato_phi(&top, p, c, r, kappa)?;
                    unconverged |= !phi.converged;
                    phi.value
                }
                DecayBranch::MeanDeviation => {
                    let ball = ball_indices(&problem.grid, kappa, c, r)?;
                    if ball.is_empty() {
                        return Err(Error::Domain(format!("ball of radius {r} holds no grid points")));
                    }
                    mean_deviation(&sol.derivatives[&zero], &ball, p)
                }
            };
            col.push(v);
        }
        values.push(col);
    }
    let exponents: Vec<Option<f64>> = values.iter().map(|col| log_log_slope(&rs, col)).collect();
    let fitted_exponent = exponents.iter().flatten().copied().reduce(f64::min);
    let monotone = values
        .iter()
        .all(|col| col.windows(2).all(|w| w[1] >= (1.0 - MONOTONE_SLACK) * w[0]));
    let min_k = kappa.min() as f64;
    let reference_exponent = match branch {
        DecayBranch::Campanato => min_k,
        DecayBranch::MeanDeviation => kappa.total() as f64 / p + min_k,
    };
    Ok(DecayTable {
        p,
        branch,
        radii: rs,
        centers,
        values,
        exponents,
        fitted_exponent,
        reference_exponent,
        monotone,
        search_unconverged: unconverged,
    })
}

/// `Q_{x0,r}(u) = sum_alpha (D^alpha u)_{x0,r} (x - x0)^alpha / alpha!`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorProjection {
    pub center: Vec<f64>,
    pub radius: f64,
    pub coefficients: BTreeMap<MultiIndex, Complex64>,
}

impl TaylorProjection {
    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        self.coefficients
            .iter()
            .map(|(a, c)| c * a.monomial(&d) / a.factorial())
            .sum()
    }

    /// `D^gamma Q` at `x`.
    pub fn derivative_at(&self, gamma: &MultiIndex, x: &[f64]) -> Complex64 {
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        self.coefficients
            .iter()
            .filter(|(a, _)| gamma.le(a))
            .map(|(a, c)| {
                // D^gamma (x^a / a!) = x^(a - gamma) / (a - gamma)!
                let rest = MultiIndex::new(
                    a.exponents().iter().zip(gamma.exponents()).map(|(p, q)| p - q).collect(),
                );
                c * rest.monomial(&d) / rest.factorial()
            })
            .sum()
    }
}

/// Ball means of the top-order derivatives and the derivatives of `u - Q`,
/// which are `D^alpha u - (D^alpha u)_{x0,r}`.
pub fn taylor_project(
    derivs: &BTreeMap<MultiIndex, GridField>,
    center: &[f64],
    r: f64,
    kappa: &KappaWeight,
) -> Result<(TaylorProjection, BTreeMap<MultiIndex, GridField>)> {
    let Some(first) = derivs.values().next() else {
        return Err(Error::Domain("empty derivative map".into()));
    };
    let spec = first.spec();
    check_dim(spec.dim(), center.len())?;
    for f in derivs.values() {
        spec.check_same(f.spec())?;
    }
    let ball = ball_indices(spec, kappa, center, r)?;
    if ball.is_empty() {
        return Err(Error::Domain(format!("ball of radius {r} holds no grid points")));
    }
    let mut coefficients = BTreeMap::new();
    let mut residual = BTreeMap::new();
    for (a, f) in derivs {
        let mean = ball.iter().map(|&i| f.values()[i]).sum::<Complex64>() / ball.len() as f64;
        coefficients.insert(a.clone(), mean);
        residual.insert(a.clone(), f.map(|v| v - mean));
    }
    Ok((
        TaylorProjection {
            center: center.to_vec(),
            radius: r,
            coefficients,
        },
        residual,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_solver::TrigPolynomial;
    use crate::symbol_analysis::catalog;

    fn heat_problem(n: usize) -> Problem {
        let grid = GridSpec::torus(2, n).unwrap();
        let u = TrigPolynomial::real_cos(vec![(vec![1, 0], 1.0, 0.3), (vec![1, 1], 0.4, 1.0)]);
        Problem::manufactured("heat", catalog::heat(), u, &grid).unwrap()
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [0.1, 0.2, 0.4, 0.8];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(2.5)).collect();
        assert!((log_log_slope(&xs, &ys).unwrap() - 2.5).abs() < 1e-12);
        assert!(log_log_slope(&xs[..2], &ys[..2]).is_none());
    }

    #[test]
    fn centers_are_five_distinct_points() {
        let grid = GridSpec::new(vec![8, 8], vec![4.0, 8.0]).unwrap();
        let c = decay_centers(&grid);
        assert_eq!(c.len(), 5);
        assert_eq!(c[0], vec![2.0, 4.0]);
        assert!(c.contains(&vec![3.0, 6.0]) && c.contains(&vec![1.0, 2.0]));
    }

    #[test]
    fn too_few_radii() {
        let p = heat_problem(16);
        assert!(matches!(campanato_decay(&p, &[0.5, 1.0], 2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn smooth_field_decays_at_least_at_reference_rate() {
        let p = heat_problem(64);
        let h = p.spacing();
        let radii: Vec<f64> = [4.0, 6.0, 8.0, 12.0, 16.0].iter().map(|k| k * h).collect();
        let t = campanato_decay(&p, &radii, 2.0).unwrap();
        assert_eq!(t.branch, DecayBranch::MeanDeviation);
        assert_eq!(t.reference_exponent, 2.5);
        assert!(t.fitted_exponent.unwrap() >= 2.0, "{:?}", t.exponents);
        assert!(t.monotone);
        let q = campanato_decay(&p, &radii, 0.5).unwrap();
        assert_eq!(q.reference_exponent, 1.0);
        assert!(q.monotone);
        assert!(q.fitted_exponent.unwrap() >= 0.7, "{:?}", q.exponents);
    }

    #[test]
    fn top_degree_polynomial_projects_to_zero() {
        // D^alpha u constant on A: phi vanishes identically
        let grid = GridSpec::torus(2, 16).unwrap();
        let derivs = BTreeMap::from([
            (MultiIndex::new(vec![2, 0]), GridField::constant(&grid, Complex64::new(2.0, 0.0))),
            (MultiIndex::new(vec![0, 1]), GridField::constant(&grid, Complex64::new(-1.0, 0.5))),
        ]);
        let k = KappaWeight::new(vec![1, 2]).unwrap();
        for r in [0.5, 1.0, 2.0] {
            let phi = campanato_phi(&derivs, 0.5, &[3.0, 3.0], r, &k).unwrap();
            assert_eq!(phi.value, 0.0);
            let (_, res) = taylor_project(&derivs, &[3.0, 3.0], r, &k).unwrap();
            assert!(res.values().all(|f| f.sup_norm() == 0.0));
        }
    }

    #[test]
    fn taylor_identities() {
        let grid = GridSpec::torus(2, 32).unwrap();
        let k = KappaWeight::new(vec![1, 2]).unwrap();
        let a = GridField::from_real_fn(&grid, |x| x[0].sin() * x[1].cos());
        let b = GridField::from_fn(&grid, |x| Complex64::new((2.0 * x[0]).cos(), x[1].sin()));
        let derivs = BTreeMap::from([(MultiIndex::new(vec![2, 0]), a.clone()), (MultiIndex::new(vec![0, 1]), b.clone())]);
        let c = [2.0, 3.0];
        let (q, res) = taylor_project(&derivs, &c, 1.0, &k).unwrap();
        // D^alpha Q is the ball mean for alpha in A, at any point
        for (alpha, coef) in &q.coefficients {
            for x in [[2.0, 3.0], [0.5, 1.0]] {
                assert!((q.derivative_at(alpha, &x) - coef).norm() < 1e-12);
            }
        }
        assert!((q.eval(&c)).norm() < 1e-15);
        // residual spectra differ from D^alpha u only in the zero mode
        let n = grid.len() as f64;
        for (alpha, f) in &derivs {
            let (s, t) = (f.spectrum(), res[alpha].spectrum());
            assert!((s[0] - t[0] - n * q.coefficients[alpha]).norm() < 1e-10 * n);
            assert!(s.iter().zip(&t).skip(1).all(|(x, y)| (x - y).norm() < 1e-10));
        }
        // re-projection leaves nothing
        let (q2, _) = taylor_project(&res, &c, 1.0, &k).unwrap();
        assert!(q2.coefficients.values().all(|v| v.norm() < 1e-10));
        // linearity
        let scaled: BTreeMap<_, _> = derivs.iter().map(|(a, f)| (a.clone(), f.scale(Complex64::new(-3.0, 1.0)))).collect();
        let (q3, _) = taylor_project(&scaled, &c, 1.0, &k).unwrap();
        for (alpha, v) in &q3.coefficients {
            assert!((v - q.coefficients[alpha] * Complex64::new(-3.0, 1.0)).norm() < 1e-12);
        }
    }
}
