use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::index_algebra::{KappaWeight, MultiIndex};

/// Sparse polynomial in `n` real variables with complex coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    n: usize,
    terms: BTreeMap<MultiIndex, Complex64>,
}

impl Polynomial {
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: Complex64) -> Self {
        let mut p = Self::zero(n);
        p.add_term(MultiIndex::zero(n), c);
        p
    }

    pub fn monomial(exponent: MultiIndex, c: Complex64) -> Self {
        let mut p = Self::zero(exponent.dim());
        p.add_term(exponent, c);
        p
    }

    /// `(i xi)^alpha`.
    pub fn i_xi_power(alpha: &MultiIndex) -> Self {
        Self::monomial(alpha.clone(), i_pow(alpha.order()))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Complex64)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, exponent: MultiIndex, c: Complex64) {
        debug_assert_eq!(exponent.dim(), self.n);
        let key = exponent.clone();
        let entry = self.terms.entry(exponent).or_insert(Complex64::new(0.0, 0.0));
        *entry += c;
        if entry.re == 0.0 && entry.im == 0.0 {
            self.terms.remove(&key);
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = Self::zero(self.n);
        for (e, v) in &self.terms {
            out.add_term(e.clone(), v * c);
        }
        out
    }

    /// `d/dxi_l`.
    pub fn partial(&self, l: usize) -> Self {
        let mut out = Self::zero(self.n);
        for (e, v) in &self.terms {
            let a = e.get(l);
            if a == 0 {
                continue;
            }
            let mut ex = e.exponents().to_vec();
            ex[l] -= 1;
            out.add_term(MultiIndex::new(ex), v * a as f64);
        }
        out
    }

    pub fn eval(&self, xi: &[f64]) -> Complex64 {
        debug_assert_eq!(xi.len(), self.n);
        self.terms
            .iter()
            .map(|(e, c)| c * e.monomial(xi))
            .sum()
    }

    /// Largest and smallest weighted degree among the terms.
    pub fn degree_range(&self, kappa: &KappaWeight) -> Option<(u32, u32)> {
        let mut it = self.terms.keys().map(|e| e.degree(kappa));
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), d| (lo.min(d), hi.max(d))))
    }

    /// Part made of terms with weighted degree exactly `d`.
    pub fn homogeneous_part(&self, kappa: &KappaWeight, d: u32) -> Self {
        Self {
            n: self.n,
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e.degree(kappa) == d)
                .map(|(e, c)| (e.clone(), *c))
                .collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::constant(self.n, Complex64::new(1.0, 0.0));
        for _ in 0..k {
            out = &out * self;
        }
        out
    }
}

/// `i^k`.
pub fn i_pow(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;

    fn add(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (e, v) in &rhs.terms {
            out.add_term(e.clone(), *v);
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;

    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (e, v) in &rhs.terms {
            out.add_term(e.clone(), -v);
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;

    fn neg(self) -> Polynomial {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero(self.n);
        for (ea, va) in &self.terms {
            for (eb, vb) in &rhs.terms {
                out.add_term(ea.add(eb), va * vb);
            }
        }
        out
    }
}
