//! Anisotropic Littlewood-Paley blocks and shell estimates of the
//! Mihlin-Hormander constants `A_gamma`.

use std::fmt::Write as _;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::index_algebra::{KappaWeight, MultiIndex};
use crate::spectral_solver::GridSpec;
use crate::symbol_analysis::{rational_derivative, RationalSymbol};

/// Transition of the bump between `s = 1/2` and `s = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Transition {
    /// `exp(-1/t)` smooth step, `C^infinity`.
    #[default]
    Smooth,
    /// Polynomial smooth step with `order` continuous derivatives.
    Polynomial { order: u32 },
}

/// Radial profile `psi(s)` of `s = |xi|_kappa`: one on `[0, 1/2]`, zero on `[1, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct BumpProfile {
    pub transition: Transition,
}

fn exp_kernel(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl BumpProfile {
    pub fn polynomial(order: u32) -> Self {
        Self {
            transition: Transition::Polynomial { order },
        }
    }

    /// Number of continuous derivatives, `None` for `C^infinity`.
    pub fn smoothness(&self) -> Option<u32> {
        match self.transition {
            Transition::Smooth => None,
            Transition::Polynomial { order } => Some(order),
        }
    }

    /// `psi` as a function of the kappa-radius.
    pub fn eval_radius(&self, s: f64) -> f64 {
        if s <= 0.5 {
            return 1.0;
        }
        if s >= 1.0 {
            return 0.0;
        }
        let t = 2.0 * s - 1.0;
        match self.transition {
            Transition::Smooth => {
                let a = exp_kernel(1.0 - t);
                a / (a + exp_kernel(t))
            }
            Transition::Polynomial { order } => {
                let n = order;
                let rise: f64 = (0..=n)
                    .map(|k| binomial(n + k, k) * binomial(2 * n + 1, n - k) * (-t).powi(k as i32))
                    .sum::<f64>()
                    * t.powi(n as i32 + 1);
                (1.0 - rise).clamp(0.0, 1.0)
            }
        }
    }
}

/// `psi(xi)` for a frequency `xi`.
pub fn bump_eval(bump: &BumpProfile, kappa: &KappaWeight, xi: &[f64]) -> f64 {
    bump.eval_radius(kappa.norm(xi))
}

/// Blocks `phi_j(xi) = psi(T_{2^{-j-1}} xi) - psi(T_{2^{-j}} xi)` for `j` in a range.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DyadicBlockSet {
    pub bump: BumpProfile,
    pub kappa: KappaWeight,
    pub j_min: i32,
    pub j_max: i32,
}

impl DyadicBlockSet {
    pub fn new(bump: BumpProfile, kappa: KappaWeight, j_min: i32, j_max: i32) -> Result<Self> {
        if j_min > j_max {
            return Err(Error::Domain(format!("empty block range [{j_min}, {j_max}]")));
        }
        Ok(Self {
            bump,
            kappa,
            j_min,
            j_max,
        })
    }

    /// Exactly the shells meeting the nonzero frequencies of `grid`.
    pub fn covering(bump: BumpProfile, kappa: KappaWeight, grid: &GridSpec) -> Result<Self> {
        check_dim(kappa.dim(), grid.dim())?;
        let n = grid.dim();
        let k = grid.wavevectors();
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for xi in k.chunks(n) {
            let s = kappa.norm(xi);
            if s > 0.0 {
                lo = lo.min(s);
                hi = hi.max(s);
            }
        }
        Self::new(bump, kappa, lo.log2().floor() as i32 - 1, hi.log2().ceil() as i32 + 1)
    }

    pub fn j_range(&self) -> RangeInclusive<i32> {
        self.j_min..=self.j_max
    }

    /// `phi_j` as a function of `s = |xi|_kappa`.
    pub fn eval_radius(&self, j: i32, s: f64) -> f64 {
        let scale = 2f64.powi(-j);
        self.bump.eval_radius(0.5 * scale * s) - self.bump.eval_radius(scale * s)
    }

    /// Annulus `2^{j_min + 1} <= s <= 2^{j_max - 1}` where the blocks sum to one.
    pub fn covered_annulus(&self) -> (f64, f64) {
        (2f64.powi(self.j_min + 1), 2f64.powi(self.j_max - 1))
    }
}

/// `phi_j(xi)`.
pub fn block_eval(blocks: &DyadicBlockSet, j: i32, xi: &[f64]) -> Result<f64> {
    if !blocks.j_range().contains(&j) {
        return Err(Error::Domain(format!(
            "block {j} outside [{}, {}]",
            blocks.j_min, blocks.j_max
        )));
    }
    check_dim(blocks.kappa.dim(), xi.len())?;
    Ok(blocks.eval_radius(j, blocks.kappa.norm(xi)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartitionCheck {
    pub max_deviation: f64,
    pub used: usize,
    pub excluded: usize,
}

/// `max |sum_j phi_j - 1|` over samples inside the covered annulus.
pub fn partition_check(blocks: &DyadicBlockSet, samples: &[Vec<f64>]) -> Result<PartitionCheck> {
    let (lo, hi) = blocks.covered_annulus();
    let mut out = PartitionCheck {
        max_deviation: 0.0,
        used: 0,
        excluded: 0,
    };
    for xi in samples {
        check_dim(blocks.kappa.dim(), xi.len())?;
        let s = blocks.kappa.norm(xi);
        if !(lo..=hi).contains(&s) {
            out.excluded += 1;
            continue;
        }
        out.used += 1;
        let sum: f64 = blocks.j_range().map(|j| blocks.eval_radius(j, s)).sum();
        out.max_deviation = out.max_deviation.max((sum - 1.0).abs());
    }
    Ok(out)
}

/// Per-axis default quadrature resolution for shell integrals.
pub fn default_mihlin_resolution(n: usize) -> usize {
    match n {
        0..=2 => 512,
        3 => 96,
        _ => 24,
    }
}

/// One row of the per-shell Mihlin table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShellRow {
    pub j: i32,
    #[serde(rename = "R")]
    pub radius: f64,
    pub shell_integral: f64,
    pub scaled_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MihlinEstimate {
    pub gamma: MultiIndex,
    pub resolution: usize,
    pub shells: Vec<ShellRow>,
    /// `max_j` of the scaled values, the estimate of `A_gamma`.
    pub constant: f64,
    /// Same estimate at half the resolution.
    pub coarse_constant: f64,
    /// False when the two resolutions differ by more than 5%.
    pub converged: bool,
}

impl MihlinEstimate {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("j,R,shell_integral,scaled_value\n");
        for r in &self.shells {
            let _ = writeln!(s, "{},{:e},{:e},{:e}", r.j, r.radius, r.shell_integral, r.scaled_value);
        }
        s
    }

    /// `(max - min) / max` of the per-shell scaled values.
    pub fn spread(&self) -> f64 {
        let max = self.shells.iter().map(|r| r.scaled_value).fold(0.0, f64::max);
        let min = self.shells.iter().map(|r| r.scaled_value).fold(f64::INFINITY, f64::min);
        if max > 0.0 {
            (max - min) / max
        } else {
            0.0
        }
    }
}

/// Relative change above which a shell estimate is flagged.
pub const MIHLIN_CONVERGENCE_TOL: f64 = 0.05;

/// `int_{R < |xi| < 2R} |D^gamma m|` by midpoint quadrature on the box
/// `prod_l [-(2R)^{k_l}, (2R)^{k_l}]`, which is `T_R` of one reference box.
fn shell_integral(ms: &RationalSymbol, kappa: &KappaWeight, radius: f64, resolution: usize) -> f64 {
    let n = kappa.dim();
    let half: Vec<f64> = kappa.weights().iter().map(|&k| (2.0 * radius).powi(k as i32)).collect();
    let steps: Vec<f64> = half.iter().map(|b| 2.0 * b / resolution as f64).collect();
    let cell: f64 = steps.iter().product();
    let total = resolution.pow(n as u32);
    let mut xi = vec![0.0; n];
    let mut sum = 0.0;
    for flat in 0..total {
        let mut rest = flat;
        for l in (0..n).rev() {
            let i = rest % resolution;
            rest /= resolution;
            xi[l] = -half[l] + (i as f64 + 0.5) * steps[l];
        }
        let s = kappa.norm(&xi);
        if s > radius && s < 2.0 * radius {
            sum += ms.eval(&xi).norm();
        }
    }
    sum * cell
}

fn scaled_table(
    dm: &RationalSymbol,
    kappa: &KappaWeight,
    gamma: &MultiIndex,
    shells: &RangeInclusive<i32>,
    resolution: usize,
) -> Vec<ShellRow> {
    let js: Vec<i32> = shells.clone().collect();
    let exponent = -(kappa.total() as i32) + gamma.degree(kappa) as i32;
    js.par_iter()
        .map(|&j| {
            let radius = 2f64.powi(j);
            let integral = shell_integral(dm, kappa, radius, resolution);
            ShellRow {
                j,
                radius,
                shell_integral: integral,
                scaled_value: integral * radius.powi(exponent),
            }
        })
        .collect()
}

/// Estimate of `A_gamma = sup_R R^{-|k| + gamma.k} int_{R<|xi|<2R} |D^gamma m|`
/// over dyadic `R = 2^j`.
pub fn mihlin_constant(
    ms: &RationalSymbol,
    kappa: &KappaWeight,
    gamma: &MultiIndex,
    shells: RangeInclusive<i32>,
    resolution: usize,
) -> Result<MihlinEstimate> {
    check_dim(kappa.dim(), ms.dim())?;
    if shells.is_empty() {
        return Err(Error::Domain("empty shell range".into()));
    }
    if resolution < 4 {
        return Err(Error::Domain(format!("quadrature resolution {resolution} is below 4")));
    }
    let dm = rational_derivative(ms, gamma)?;
    let fine = scaled_table(&dm, kappa, gamma, &shells, resolution);
    let coarse = scaled_table(&dm, kappa, gamma, &shells, resolution / 2);
    let max = |t: &[ShellRow]| t.iter().map(|r| r.scaled_value).fold(0.0, f64::max);
    let constant = max(&fine);
    let coarse_constant = max(&coarse);
    let change = if constant > 0.0 {
        (constant - coarse_constant).abs() / constant
    } else {
        coarse_constant
    };
    Ok(MihlinEstimate {
        gamma: gamma.clone(),
        resolution,
        shells: fine,
        constant,
        coarse_constant,
        converged: change <= MIHLIN_CONVERGENCE_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index_algebra::unit_ball_volume;
    use crate::symbol_analysis::{catalog, Polynomial};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn heat_kappa() -> KappaWeight {
        KappaWeight::new(vec![1, 2]).unwrap()
    }

    #[test]
    fn bump_values() {
        for bump in [BumpProfile::default(), BumpProfile::polynomial(3)] {
            assert_eq!(bump.eval_radius(0.3), 1.0);
            assert_eq!(bump.eval_radius(1.5), 0.0);
            let v = bump.eval_radius(0.75);
            assert!(v > 0.0 && v < 1.0);
            let mut prev = 1.0;
            for i in 0..=1000 {
                let s = 0.5 + i as f64 / 2000.0;
                let v = bump.eval_radius(s);
                assert!(v <= prev && (0.0..=1.0).contains(&v));
                prev = v;
            }
        }
        assert!((BumpProfile::default().eval_radius(0.75) - 0.5).abs() < 1e-15);
        let k = heat_kappa();
        assert_eq!(bump_eval(&BumpProfile::default(), &k, &[0.3, 0.0]), 1.0);
    }

    #[test]
    fn polynomial_step_is_smooth_at_the_ends() {
        let b = BumpProfile::polynomial(2);
        let h = 1e-3;
        // C^2 with vanishing derivatives at both ends: psi moves by O(h^3)
        assert!((1.0 - b.eval_radius(0.5 + h)) < 20.0 * (2.0 * h).powi(3));
        assert!(b.eval_radius(1.0 - h) < 20.0 * (2.0 * h).powi(3));
        assert_eq!(b.smoothness(), Some(2));
    }

    #[test]
    fn block_examples() {
        let blocks = DyadicBlockSet::new(BumpProfile::default(), heat_kappa(), -4, 6).unwrap();
        for j in -3..=5 {
            let s = 2f64.powi(j);
            // on the t axis |(0, t)|_k = sqrt(t)
            assert_eq!(block_eval(&blocks, j, &[s, 0.0]).unwrap(), 1.0);
            assert_eq!(block_eval(&blocks, j, &[0.0, s * s]).unwrap(), 1.0);
            assert_eq!(blocks.eval_radius(j, 16.0 * s), 0.0);
        }
        assert!(block_eval(&blocks, 7, &[1.0, 0.0]).is_err());
        let s = 1.37;
        let sum: f64 = (-3..=3).map(|j| blocks.eval_radius(j, s)).sum();
        let b = BumpProfile::default();
        let tele = b.eval_radius(2f64.powi(-4) * s) - b.eval_radius(2f64.powi(3) * s);
        assert!((sum - tele).abs() < 1e-15);
    }

    #[test]
    fn shell_support_is_exact() {
        let blocks = DyadicBlockSet::new(BumpProfile::default(), heat_kappa(), -6, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            let j = rng.random_range(-6..=6);
            let s = 2f64.powf(rng.random_range(-10.0..10.0));
            if s < 2f64.powi(j - 1) || s > 2f64.powi(j + 1) {
                assert_eq!(blocks.eval_radius(j, s), 0.0);
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        let blocks = DyadicBlockSet::new(BumpProfile::default(), heat_kappa(), -8, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let samples: Vec<Vec<f64>> = (0..10_000)
            .map(|_| vec![rng.random_range(-100.0..100.0), rng.random_range(-1e4..1e4)])
            .chain([vec![0.0, 0.0]])
            .collect();
        let check = partition_check(&blocks, &samples).unwrap();
        assert!(check.max_deviation <= 1e-12);
        assert!(check.excluded >= 1 && check.used > 9000);
        let single = DyadicBlockSet::new(BumpProfile::default(), heat_kappa(), 0, 0).unwrap();
        assert_eq!(single.eval_radius(0, 1.0), 1.0);
    }

    #[test]
    fn covering_range_brackets_the_lattice() {
        let grid = GridSpec::torus(2, 16).unwrap();
        let blocks = DyadicBlockSet::covering(BumpProfile::default(), heat_kappa(), &grid).unwrap();
        // smallest nonzero |k|_kappa is 1, largest is |(8, 8)|_kappa = sqrt(64 + 8)
        assert_eq!(blocks.j_min, -1);
        assert_eq!(blocks.j_max, (72f64.sqrt().log2().ceil()) as i32 + 1);
    }

    #[test]
    fn mihlin_of_one_is_the_shell_volume() {
        let k = heat_kappa();
        let one = RationalSymbol::one(2);
        let est = mihlin_constant(&one, &k, &MultiIndex::zero(2), 0..=3, 512).unwrap();
        // oracle: (2^|k| - 1) V1 with V1 from the ball-volume quadrature
        let expect = 7.0 * unit_ball_volume(&k, 1024);
        assert!((expect - 7.0 * 8.0 / 3.0).abs() < 1e-3);
        for row in &est.shells {
            assert!((row.scaled_value - expect).abs() < 0.01 * expect, "{row:?}");
        }
        assert!(est.converged);
        let d = mihlin_constant(&one, &k, &MultiIndex::new(vec![1, 0]), 0..=3, 64).unwrap();
        assert_eq!(d.constant, 0.0);
        assert!(d.converged);
    }

    #[test]
    fn degree_zero_multiplier_is_flat() {
        let op = catalog::heat();
        let ms = RationalSymbol::solution_multiplier(&op, &MultiIndex::new(vec![2, 0]), &MultiIndex::zero(2)).unwrap();
        let est = mihlin_constant(&ms, op.kappa(), &MultiIndex::zero(2), -2..=7, 256).unwrap();
        assert!(est.spread() < 1e-6, "{}", est.spread());
        let g = MultiIndex::new(vec![1, 0]);
        let est = mihlin_constant(&ms, op.kappa(), &g, 0..=4, 256).unwrap();
        assert!(est.spread() < 1e-6 && est.constant > 0.0);
        assert!(est.to_csv().starts_with("j,R,shell_integral,scaled_value\n"));
        assert_eq!(est.to_csv().lines().count(), 6);
    }

    #[test]
    fn shell_quadrature_matches_two_shell_oracle() {
        // |xi^2 / (xi^2 + i tau)| integrated independently in polar-like
        // coordinates over R < |xi|_k < 2R for R = 1 and R = 2
        let ms = RationalSymbol::new(
            Polynomial::monomial(MultiIndex::new(vec![2, 0]), Complex64::new(1.0, 0.0)),
            catalog::heat().principal_symbol(None).unwrap(),
        )
        .unwrap();
        let k = heat_kappa();
        let direct = |radius: f64| -> f64 {
            // integrate over x in (-2R, 2R), t-range where R^2 < x^2 + |t| < 4R^2
            let steps = 4000;
            let hx = 4.0 * radius / steps as f64;
            let mut sum = 0.0;
            for i in 0..steps {
                let x = -2.0 * radius + (i as f64 + 0.5) * hx;
                let t_lo = (radius * radius - x * x).max(0.0);
                let t_hi = 4.0 * radius * radius - x * x;
                // |m| = x^2 / sqrt(x^4 + t^2); antiderivative in t: x^2 asinh(t / x^2)
                let a = x * x;
                sum += 2.0 * a * ((t_hi / a).asinh() - (t_lo / a).asinh()) * hx;
            }
            sum
        };
        let est = mihlin_constant(&ms, &k, &MultiIndex::zero(2), 0..=1, 512).unwrap();
        for row in &est.shells {
            let oracle = direct(row.radius) * row.radius.powi(-3);
            assert!((row.scaled_value - oracle).abs() < 0.01 * oracle, "{row:?} vs {oracle}");
        }
    }
}
