use num_complex::Complex64;

use super::operator::OperatorSpec;
use super::polynomial::Polynomial;
use crate::dyadic_decomposition::BumpProfile;
use crate::error::{check_dim, Result};
use crate::index_algebra::{KappaWeight, MultiIndex};

/// Factor `1 - psi(T_{1/radius} xi)`: zero on `|xi|_k <= radius / 2`, one
/// on `|xi|_k >= radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowFrequencyCutoff {
    pub radius: f64,
    pub kappa: KappaWeight,
    pub bump: BumpProfile,
}

impl LowFrequencyCutoff {
    pub fn new(radius: f64, kappa: KappaWeight) -> Self {
        Self {
            radius,
            kappa,
            bump: BumpProfile::default(),
        }
    }

    pub fn factor(&self, xi: &[f64]) -> f64 {
        if self.radius <= 0.0 {
            return 1.0;
        }
        1.0 - self.bump.eval_radius(self.kappa.norm(xi) / self.radius)
    }
}

/// Rational symbol `numerator / base^power`, optionally multiplied by a
/// low-frequency cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalSymbol {
    numerator: Polynomial,
    base: Polynomial,
    power: u32,
    cutoff: Option<LowFrequencyCutoff>,
}

impl RationalSymbol {
    pub fn new(numerator: Polynomial, denominator: Polynomial) -> Result<Self> {
        check_dim(numerator.dim(), denominator.dim())?;
        Ok(Self {
            numerator,
            base: denominator,
            power: 1,
            cutoff: None,
        })
    }

    /// The constant multiplier `1`.
    pub fn one(n: usize) -> Self {
        let one = Polynomial::constant(n, Complex64::new(1.0, 0.0));
        Self {
            numerator: one.clone(),
            base: one,
            power: 0,
            cutoff: None,
        }
    }

    /// `m_{alpha beta}(xi) = (i xi)^{alpha + beta} / p(xi)` for a constant operator.
    pub fn solution_multiplier(op: &OperatorSpec, alpha: &MultiIndex, beta: &MultiIndex) -> Result<Self> {
        let num = Polynomial::i_xi_power(&alpha.add(beta));
        Self::new(num, op.principal_symbol(None)?)
    }

    pub fn with_cutoff(mut self, cutoff: LowFrequencyCutoff) -> Self {
        self.cutoff = Some(cutoff);
        self
    }

    pub fn dim(&self) -> usize {
        self.numerator.dim()
    }

    pub fn numerator(&self) -> &Polynomial {
        &self.numerator
    }

    /// Expanded denominator `base^power`.
    pub fn denominator(&self) -> Polynomial {
        self.base.pow(self.power)
    }

    pub fn base(&self) -> &Polynomial {
        &self.base
    }

    pub fn power(&self) -> u32 {
        self.power
    }

    pub fn cutoff(&self) -> Option<&LowFrequencyCutoff> {
        self.cutoff.as_ref()
    }

    pub fn eval(&self, xi: &[f64]) -> Complex64 {
        let c = self.cutoff.as_ref().map_or(1.0, |c| c.factor(xi));
        if c == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let num = self.numerator.eval(xi);
        let den = self.base.eval(xi).powu(self.power);
        num / den * c
    }

    /// `d/dxi_l` by the quotient rule on `N / B^k`:
    /// `(N' B - k N B') / B^(k+1)`. The cutoff factor is carried along
    /// unchanged, so the result is exact where the cutoff is saturated.
    pub fn partial(&self, l: usize) -> Self {
        let dn = self.numerator.partial(l);
        if self.power == 0 {
            return Self {
                numerator: dn,
                base: self.base.clone(),
                power: 0,
                cutoff: self.cutoff.clone(),
            };
        }
        let db = self.base.partial(l);
        let k = Complex64::new(self.power as f64, 0.0);
        let numerator = &(&dn * &self.base) - &(&self.numerator * &db).scale(k);
        Self {
            numerator,
            base: self.base.clone(),
            power: self.power + 1,
            cutoff: self.cutoff.clone(),
        }
    }
}

/// `D^gamma ms` as an expanded rational symbol.
pub fn rational_derivative(ms: &RationalSymbol, gamma: &MultiIndex) -> Result<RationalSymbol> {
    check_dim(ms.dim(), gamma.dim())?;
    let mut out = ms.clone();
    for l in 0..gamma.dim() {
        for _ in 0..gamma.get(l) {
            out = out.partial(l);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol_analysis::catalog;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn quotient_rule_example() {
        // d/dxi of (i xi) / (xi^2 + i tau)
        let num = Polynomial::i_xi_power(&MultiIndex::new(vec![1, 0]));
        let heat = catalog::heat().principal_symbol(None).unwrap();
        let ms = RationalSymbol::new(num, heat).unwrap();
        let d = rational_derivative(&ms, &MultiIndex::new(vec![1, 0])).unwrap();
        for xi in [[0.3, 1.1], [-2.0, 0.5], [1.0, -3.0]] {
            let den = c(xi[0] * xi[0], xi[1]);
            let expect = (c(0.0, 1.0) * den - c(0.0, xi[0]) * c(2.0 * xi[0], 0.0)) / (den * den);
            assert!((d.eval(&xi) - expect).norm() < 1e-13);
        }
        assert_eq!(d.power(), 2);
        assert!((d.denominator().eval(&[0.3, 1.1]) - c(0.09, 1.1).powu(2)).norm() < 1e-13);
    }

    #[test]
    fn zero_gamma_is_identity() {
        let op = catalog::heat();
        let ms = RationalSymbol::solution_multiplier(&op, &MultiIndex::new(vec![2, 0]), &MultiIndex::zero(2)).unwrap();
        assert_eq!(rational_derivative(&ms, &MultiIndex::zero(2)).unwrap(), ms);
    }

    #[test]
    fn derivatives_commute() {
        let op = catalog::wave_cubic();
        let ms = RationalSymbol::solution_multiplier(&op, &MultiIndex::new(vec![3, 0]), &MultiIndex::zero(2)).unwrap();
        let g1 = MultiIndex::new(vec![1, 0]);
        let g2 = MultiIndex::new(vec![0, 2]);
        let a = rational_derivative(&rational_derivative(&ms, &g1).unwrap(), &g2).unwrap();
        let b = rational_derivative(&rational_derivative(&ms, &g2).unwrap(), &g1).unwrap();
        assert_eq!(a.power(), b.power());
        let diff = a.numerator() - b.numerator();
        for (_, v) in diff.terms() {
            assert!(v.norm() < 1e-9);
        }
        for xi in [[0.7, -0.2], [1.5, 2.5]] {
            assert!((a.eval(&xi) - b.eval(&xi)).norm() < 1e-10 * a.eval(&xi).norm().max(1.0));
        }
    }

    #[test]
    fn derivative_decays_like_kappa_weight() {
        // |d/dxi m| |xi|_k^{k_1} stays bounded on dyadic shells
        let op = catalog::heat();
        let kappa = op.kappa().clone();
        let ms = RationalSymbol::solution_multiplier(&op, &MultiIndex::new(vec![2, 0]), &MultiIndex::zero(2)).unwrap();
        let d = rational_derivative(&ms, &MultiIndex::new(vec![1, 0])).unwrap();
        let sphere = crate::symbol_analysis::KappaSphere::new(&kappa, 400, 11);
        let mut sups = Vec::new();
        for j in 0..=10 {
            let mut sup = 0.0f64;
            for s in [1.0, 1.3, 1.7, 1.99] {
                let r = 2f64.powi(j) * s;
                for p in sphere.points() {
                    let xi = crate::index_algebra::dilate(r, p, &kappa).unwrap();
                    sup = sup.max(d.eval(&xi).norm() * r.powi(1));
                }
            }
            sups.push(sup);
        }
        let first = sups[0];
        assert!(sups.iter().all(|s| *s <= 10.0 * first && *s >= first / 10.0), "{sups:?}");
    }

    #[test]
    fn cutoff_kills_low_frequencies() {
        let op = catalog::heat();
        let kappa = op.kappa().clone();
        let ms = RationalSymbol::solution_multiplier(&op, &MultiIndex::new(vec![0, 1]), &MultiIndex::zero(2))
            .unwrap()
            .with_cutoff(LowFrequencyCutoff::new(4.0, kappa));
        assert_eq!(ms.eval(&[0.0, 0.0]), c(0.0, 0.0));
        assert_eq!(ms.eval(&[1.9, 0.0]), c(0.0, 0.0));
        let full = RationalSymbol::solution_multiplier(&op, &MultiIndex::new(vec![0, 1]), &MultiIndex::zero(2)).unwrap();
        assert_eq!(ms.eval(&[5.0, 1.0]), full.eval(&[5.0, 1.0]));
    }
}
