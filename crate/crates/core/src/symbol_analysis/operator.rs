use std::collections::BTreeMap;

use num_complex::Complex64;

use super::polynomial::Polynomial;
use crate::error::{check_dim, Error, Result};
use crate::index_algebra::{IndexSetPair, KappaWeight, MultiIndex};
use crate::spectral_solver::GridField;

/// A coefficient `a_{alpha beta}`: a complex constant or a sampled field.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    Constant(Complex64),
    Field(GridField),
}

impl Coefficient {
    pub fn constant(re: f64, im: f64) -> Self {
        Self::Constant(Complex64::new(re, im))
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Self::Constant(_))
    }

    /// Value at `x`; fields are evaluated by trigonometric interpolation.
    pub fn at(&self, x: Option<&[f64]>) -> Result<Complex64> {
        match (self, x) {
            (Self::Constant(c), _) => Ok(*c),
            (Self::Field(f), Some(x)) => f.interpolate(x),
            (Self::Field(_), None) => Err(Error::Contract(
                "field coefficient needs an evaluation point".into(),
            )),
        }
    }

    /// Value at grid sample `flat` (fields) or the constant.
    pub fn sample(&self, flat: usize) -> Complex64 {
        match self {
            Self::Constant(c) => *c,
            Self::Field(f) => f.values()[flat],
        }
    }
}

/// Key `(alpha, beta)` of a coefficient in `sum D^beta (a_{alpha beta} D^alpha)`.
pub type TermKey = (MultiIndex, MultiIndex);

/// A kappa-homogeneous operator `P = sum D^beta(a_{ab} D^alpha)` plus an
/// optional lower-order part `H` with `(alpha + beta) . kappa < m`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    index_pair: IndexSetPair,
    coeffs: BTreeMap<TermKey, Coefficient>,
    lower_order: BTreeMap<TermKey, Coefficient>,
}

impl OperatorSpec {
    pub fn new(
        index_pair: IndexSetPair,
        coeffs: BTreeMap<TermKey, Coefficient>,
        lower_order: BTreeMap<TermKey, Coefficient>,
    ) -> Result<Self> {
        let kappa = index_pair.kappa();
        let m = index_pair.order();
        let n = kappa.dim();
        if coeffs.is_empty() {
            return Err(Error::Contract("operator needs at least one principal term".into()));
        }
        let mut grid = None;
        let mut see_field = |c: &Coefficient| -> Result<()> {
            if let Coefficient::Field(f) = c {
                match &grid {
                    None => grid = Some(f.spec().clone()),
                    Some(g) => g.check_same(f.spec())?,
                }
                check_dim(n, f.spec().dim())?;
            }
            Ok(())
        };
        for ((alpha, beta), c) in &coeffs {
            check_dim(n, alpha.dim())?;
            check_dim(n, beta.dim())?;
            if !index_pair.a().contains(alpha) || !index_pair.b().contains(beta) {
                return Err(Error::Contract(format!(
                    "principal term ({alpha}, {beta}) is not in A x B"
                )));
            }
            see_field(c)?;
        }
        for ((alpha, beta), c) in &lower_order {
            check_dim(n, alpha.dim())?;
            check_dim(n, beta.dim())?;
            if alpha.add(beta).degree(kappa) >= m {
                return Err(Error::Contract(format!(
                    "lower-order term ({alpha}, {beta}) has kappa-degree {} >= m = {m}",
                    alpha.add(beta).degree(kappa)
                )));
            }
            see_field(c)?;
        }
        Ok(Self {
            index_pair,
            coeffs,
            lower_order,
        })
    }

    /// Constant-coefficient principal operator from `(alpha, beta, a)` triples.
    pub fn constant(index_pair: IndexSetPair, terms: &[(MultiIndex, MultiIndex, Complex64)]) -> Result<Self> {
        let coeffs = terms
            .iter()
            .map(|(a, b, c)| ((a.clone(), b.clone()), Coefficient::Constant(*c)))
            .collect();
        Self::new(index_pair, coeffs, BTreeMap::new())
    }

    pub fn index_pair(&self) -> &IndexSetPair {
        &self.index_pair
    }

    pub fn kappa(&self) -> &KappaWeight {
        self.index_pair.kappa()
    }

    pub fn order(&self) -> u32 {
        self.index_pair.order()
    }

    pub fn dim(&self) -> usize {
        self.index_pair.dim()
    }

    pub fn coeffs(&self) -> &BTreeMap<TermKey, Coefficient> {
        &self.coeffs
    }

    pub fn lower_order(&self) -> &BTreeMap<TermKey, Coefficient> {
        &self.lower_order
    }

    pub fn has_lower_order(&self) -> bool {
        !self.lower_order.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.values().chain(self.lower_order.values()).all(Coefficient::is_constant)
    }

    /// Grid carrying the field coefficients, if any.
    pub fn coefficient_grid(&self) -> Option<&crate::spectral_solver::GridSpec> {
        self.coeffs
            .values()
            .chain(self.lower_order.values())
            .find_map(|c| match c {
                Coefficient::Field(f) => Some(f.spec()),
                Coefficient::Constant(_) => None,
            })
    }

    /// Copy with the lower-order part replaced.
    pub fn with_lower_order(&self, lower_order: BTreeMap<TermKey, Coefficient>) -> Result<Self> {
        Self::new(self.index_pair.clone(), self.coeffs.clone(), lower_order)
    }

    /// Copy without the lower-order part.
    pub fn principal(&self) -> Self {
        Self {
            index_pair: self.index_pair.clone(),
            coeffs: self.coeffs.clone(),
            lower_order: BTreeMap::new(),
        }
    }

    fn freeze_map(
        map: &BTreeMap<TermKey, Coefficient>,
        value: impl Fn(&Coefficient) -> Result<Complex64>,
    ) -> Result<BTreeMap<TermKey, Coefficient>> {
        map.iter()
            .map(|(k, c)| Ok((k.clone(), Coefficient::Constant(value(c)?))))
            .collect()
    }

    /// Constant-coefficient operator with every field frozen at `x`.
    pub fn frozen_at(&self, x: &[f64]) -> Result<Self> {
        Ok(Self {
            index_pair: self.index_pair.clone(),
            coeffs: Self::freeze_map(&self.coeffs, |c| c.at(Some(x)))?,
            lower_order: Self::freeze_map(&self.lower_order, |c| c.at(Some(x)))?,
        })
    }

    /// Constant-coefficient operator with fields frozen at grid sample `flat`.
    pub fn frozen_at_sample(&self, flat: usize) -> Self {
        Self {
            index_pair: self.index_pair.clone(),
            coeffs: Self::freeze_map(&self.coeffs, |c| Ok(c.sample(flat))).expect("infallible"),
            lower_order: Self::freeze_map(&self.lower_order, |c| Ok(c.sample(flat)))
                .expect("infallible"),
        }
    }

    fn symbol_of(
        map: &BTreeMap<TermKey, Coefficient>,
        n: usize,
        x: Option<&[f64]>,
    ) -> Result<Polynomial> {
        let mut p = Polynomial::zero(n);
        for ((alpha, beta), c) in map {
            let e = alpha.add(beta);
            let term = Polynomial::i_xi_power(&e).scale(c.at(x)?);
            p = &p + &term;
        }
        Ok(p)
    }

    /// Principal symbol `p(x, xi)` as a polynomial in `xi`.
    pub fn principal_symbol(&self, x: Option<&[f64]>) -> Result<Polynomial> {
        Self::symbol_of(&self.coeffs, self.dim(), x)
    }

    /// Lower-order symbol `h(x, xi)`.
    pub fn lower_symbol(&self, x: Option<&[f64]>) -> Result<Polynomial> {
        Self::symbol_of(&self.lower_order, self.dim(), x)
    }

    /// `p + h`.
    pub fn full_symbol(&self, x: Option<&[f64]>) -> Result<Polynomial> {
        Ok(&self.principal_symbol(x)? + &self.lower_symbol(x)?)
    }

    /// Value of the principal coefficient `a_{alpha beta}` (zero if absent).
    pub fn coefficient(&self, alpha: &MultiIndex, beta: &MultiIndex) -> Option<&Coefficient> {
        self.coeffs.get(&(alpha.clone(), beta.clone()))
    }
}
