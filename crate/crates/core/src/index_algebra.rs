//! Multi-index arithmetic and the quasi-metric geometry attached to an
//! anisotropy weight `kappa`.
//!
//! Coordinates are scaled by the dilation `T_r x = (r^k1 x1, ..., r^kn xn)`
//! and measured with `|x|_k = sqrt(sum |x_l|^(2/k_l))`, so that
//! `|T_r x|_k = r |x|_k` and `|B_r| = r^|k| |B_1|`.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Default seed used by the sampling routines of this module.
pub const DEFAULT_SEED: u64 = 0x6b_6170_7061;

/// Anisotropy weights `kappa = (k1, ..., kn)`, every entry at least one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct KappaWeight(Vec<u32>);

impl KappaWeight {
    pub fn new(weights: Vec<u32>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Domain("kappa must have at least one entry".into()));
        }
        if weights.contains(&0) {
            return Err(Error::Domain(format!(
                "kappa entries must be positive, got {weights:?}"
            )));
        }
        Ok(Self(weights))
    }

    /// Isotropic weight `(1, ..., 1)`.
    pub fn isotropic(n: usize) -> Self {
        Self(vec![1; n.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn weights(&self) -> &[u32] {
        &self.0
    }

    pub fn get(&self, l: usize) -> u32 {
        self.0[l]
    }

    /// `|kappa| = sum k_l`, the homogeneous dimension.
    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn min(&self) -> u32 {
        *self.0.iter().min().expect("nonempty")
    }

    pub fn max(&self) -> u32 {
        *self.0.iter().max().expect("nonempty")
    }

    /// `|x|_k` of a single point.
    pub fn norm(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        x.iter()
            .zip(&self.0)
            .map(|(v, &k)| axis_term(v.abs(), k))
            .sum::<f64>()
            .sqrt()
    }
}

impl TryFrom<Vec<u32>> for KappaWeight {
    type Error = Error;

    fn try_from(v: Vec<u32>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<KappaWeight> for Vec<u32> {
    fn from(k: KappaWeight) -> Self {
        k.0
    }
}

/// `|d|^(2/k)`, the per-axis contribution to the squared quasi-distance.
#[inline]
pub(crate) fn axis_term(d: f64, k: u32) -> f64 {
    match k {
        1 => d * d,
        2 => d,
        _ => d.powf(2.0 / k as f64),
    }
}

/// Exponent vector of a monomial or derivative.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        Self(exponents)
    }

    pub fn zero(n: usize) -> Self {
        Self(vec![0; n])
    }

    /// Unit index `e_l` in dimension `n`.
    pub fn unit(n: usize, l: usize) -> Self {
        let mut e = vec![0; n];
        e[l] = 1;
        Self(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn get(&self, l: usize) -> u32 {
        self.0[l]
    }

    /// Plain order `|alpha| = sum alpha_l`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Weighted degree `alpha . kappa`.
    pub fn degree(&self, kappa: &KappaWeight) -> u32 {
        debug_assert_eq!(self.dim(), kappa.dim());
        self.0.iter().zip(kappa.weights()).map(|(a, k)| a * k).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.dim(), other.dim());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Componentwise `self <= other`.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// `alpha! = prod alpha_l!`
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&a| (1..=a).map(f64::from).product::<f64>())
            .product()
    }

    /// `x^alpha` for a real point.
    pub fn monomial(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(&a, &v)| v.powi(a as i32))
            .product()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u32::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Index sets `A`, `B` with `(alpha + beta) . kappa = m` and `A` B-complete.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSetPair {
    a: BTreeSet<MultiIndex>,
    b: BTreeSet<MultiIndex>,
    m: u32,
    kappa: KappaWeight,
}

impl IndexSetPair {
    /// Builds the pair from `B`, deriving `A` as its completion.
    pub fn from_b(b: BTreeSet<MultiIndex>, m: u32, kappa: KappaWeight) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::Domain("index set B must be nonempty".into()));
        }
        for beta in &b {
            check_dim(kappa.dim(), beta.dim())?;
        }
        let completion = b_completion(&b, m, &kappa)?;
        if let Some(w) = completion.warnings.first() {
            return Err(Error::Domain(w.clone()));
        }
        if completion.indices.is_empty() {
            return Err(Error::Domain(format!(
                "no multi-index alpha satisfies (alpha+beta).kappa = {m} for every beta in B"
            )));
        }
        Ok(Self {
            a: completion.indices,
            b,
            m,
            kappa,
        })
    }

    pub fn a(&self) -> &BTreeSet<MultiIndex> {
        &self.a
    }

    pub fn b(&self) -> &BTreeSet<MultiIndex> {
        &self.b
    }

    pub fn order(&self) -> u32 {
        self.m
    }

    pub fn kappa(&self) -> &KappaWeight {
        &self.kappa
    }

    pub fn dim(&self) -> usize {
        self.kappa.dim()
    }

    /// The lower index set `A'`.
    pub fn lower(&self) -> BTreeSet<MultiIndex> {
        lower_index_set(&self.b, self.m, &self.kappa)
            .map(|s| s.indices)
            .unwrap_or_default()
    }
}

/// Result of an index-set search plus any warnings raised on the way.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IndexSearch {
    pub indices: BTreeSet<MultiIndex>,
    pub warnings: Vec<String>,
}

fn validate_b(b: &BTreeSet<MultiIndex>, m: u32, kappa: &KappaWeight) -> Result<Option<String>> {
    for beta in b {
        check_dim(kappa.dim(), beta.dim())?;
        if beta.degree(kappa) > m {
            return Ok(Some(format!(
                "beta = {beta} has kappa-degree {} > m = {m}",
                beta.degree(kappa)
            )));
        }
    }
    Ok(None)
}

/// Calls `visit` for every `alpha` with `alpha . kappa <= budget`.
fn enumerate_up_to(kappa: &KappaWeight, budget: u32, visit: &mut impl FnMut(&[u32], u32)) {
    fn rec(
        l: usize,
        kappa: &[u32],
        left: u32,
        cur: &mut Vec<u32>,
        used: u32,
        visit: &mut impl FnMut(&[u32], u32),
    ) {
        if l == kappa.len() {
            visit(cur, used);
            return;
        }
        let k = kappa[l];
        for a in 0..=left / k {
            cur.push(a);
            rec(l + 1, kappa, left - a * k, cur, used + a * k, visit);
            cur.pop();
        }
    }
    let mut cur = Vec::with_capacity(kappa.dim());
    rec(0, kappa.weights(), budget, &mut cur, 0, visit);
}

/// `{alpha : (alpha + beta) . kappa = m for all beta in B}`.
pub fn b_completion(b: &BTreeSet<MultiIndex>, m: u32, kappa: &KappaWeight) -> Result<IndexSearch> {
    if let Some(w) = validate_b(b, m, kappa)? {
        return Ok(IndexSearch {
            indices: BTreeSet::new(),
            warnings: vec![w],
        });
    }
    let mut degrees = b.iter().map(|beta| beta.degree(kappa));
    let Some(first) = degrees.next() else {
        return Ok(IndexSearch::default());
    };
    // every beta must share one degree, otherwise no alpha can complete all of them
    if degrees.any(|d| d != first) {
        return Ok(IndexSearch::default());
    }
    let target = m - first;
    let mut indices = BTreeSet::new();
    enumerate_up_to(kappa, target, &mut |alpha, deg| {
        if deg == target {
            indices.insert(MultiIndex(alpha.to_vec()));
        }
    });
    Ok(IndexSearch {
        indices,
        warnings: Vec::new(),
    })
}

/// `{gamma : (gamma + beta) . kappa <= m for all beta in B}`.
pub fn lower_index_set(
    b: &BTreeSet<MultiIndex>,
    m: u32,
    kappa: &KappaWeight,
) -> Result<IndexSearch> {
    if let Some(w) = validate_b(b, m, kappa)? {
        return Ok(IndexSearch {
            indices: BTreeSet::new(),
            warnings: vec![w],
        });
    }
    let Some(max_beta) = b.iter().map(|beta| beta.degree(kappa)).max() else {
        return Ok(IndexSearch::default());
    };
    let mut indices = BTreeSet::new();
    enumerate_up_to(kappa, m - max_beta, &mut |gamma, _| {
        indices.insert(MultiIndex(gamma.to_vec()));
    });
    Ok(IndexSearch {
        indices,
        warnings: Vec::new(),
    })
}

/// `|x - y|_kappa`.
pub fn kappa_distance(x: &[f64], y: &[f64], kappa: &KappaWeight) -> Result<f64> {
    check_dim(kappa.dim(), x.len())?;
    check_dim(kappa.dim(), y.len())?;
    Ok(x.iter()
        .zip(y)
        .zip(kappa.weights())
        .map(|((a, b), &k)| axis_term((a - b).abs(), k))
        .sum::<f64>()
        .sqrt())
}

/// The anisotropic dilation `T_r x`.
pub fn dilate(r: f64, x: &[f64], kappa: &KappaWeight) -> Result<Vec<f64>> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("dilation factor must be positive, got {r}")));
    }
    check_dim(kappa.dim(), x.len())?;
    Ok(x.iter()
        .zip(kappa.weights())
        .map(|(v, &k)| v * r.powi(k as i32))
        .collect())
}

/// Volume of a kappa-ball together with the quadrature diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BallVolume {
    pub volume: f64,
    pub unit_volume: f64,
    /// `|V1(resolution) - V1(resolution / 2)|`.
    pub error_estimate: f64,
    pub resolution: usize,
}

/// Default per-axis quadrature resolution for the unit-ball volume.
pub fn default_ball_resolution(n: usize) -> usize {
    match n {
        0..=2 => 1024,
        3 => 256,
        _ => 32,
    }
}

/// Unit kappa-ball volume by midpoint tensor quadrature.
///
/// The first `n - 1` axes are sampled at `resolution` midpoints on `[-1, 1]`;
/// along the last axis the chord `|x_n| <= (1 - s)^(k_n / 2)` is integrated
/// in closed form.
pub fn unit_ball_volume(kappa: &KappaWeight, resolution: usize) -> f64 {
    let n = kappa.dim();
    let last = kappa.get(n - 1) as f64;
    let outer = &kappa.weights()[..n - 1];
    let res = resolution.max(1);
    let h = 2.0 / res as f64;
    let mids: Vec<f64> = (0..res).map(|i| -1.0 + (i as f64 + 0.5) * h).collect();
    let cell = h.powi(outer.len() as i32);

    fn rec(outer: &[u32], mids: &[f64], used: f64, last: f64) -> f64 {
        match outer.split_first() {
            None => {
                let slack = 1.0 - used;
                if slack > 0.0 {
                    2.0 * slack.powf(last / 2.0)
                } else {
                    0.0
                }
            }
            Some((&k, rest)) => mids
                .iter()
                .map(|&x| {
                    let u = used + axis_term(x.abs(), k);
                    if u >= 1.0 {
                        0.0
                    } else {
                        rec(rest, mids, u, last)
                    }
                })
                .sum(),
        }
    }
    rec(outer, &mids, 0.0, last) * cell
}

/// `|B_r(0)| = r^|kappa| V1`, with `V1` from [`unit_ball_volume`].
pub fn ball_volume(r: f64, kappa: &KappaWeight, resolution: usize) -> Result<BallVolume> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("ball radius must be positive, got {r}")));
    }
    let unit = unit_ball_volume(kappa, resolution);
    let coarse = unit_ball_volume(kappa, (resolution / 2).max(1));
    Ok(BallVolume {
        volume: r.powi(kappa.total() as i32) * unit,
        unit_volume: unit,
        error_estimate: (unit - coarse).abs(),
        resolution,
    })
}

/// Empirical quasi-triangle constant from random triples in `[-1, 1]^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuasiTriangle {
    pub constant: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Max over sampled triples of `|x-z| / (|x-y| + |y-z|)`; each draw also
/// evaluates the degenerate triple `y = x`.
pub fn quasi_triangle_constant(kappa: &KappaWeight, samples: usize, seed: u64) -> Result<QuasiTriangle> {
    if samples < 3 {
        return Err(Error::Domain(format!("need at least 3 samples, got {samples}")));
    }
    let n = kappa.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    };
    let mut best = 0.0f64;
    for _ in 0..samples {
        let x = draw(&mut rng);
        let y = draw(&mut rng);
        let z = draw(&mut rng);
        let xz = kappa_distance(&x, &z, kappa)?;
        if xz == 0.0 {
            continue;
        }
        let xy = kappa_distance(&x, &y, kappa)?;
        let yz = kappa_distance(&y, &z, kappa)?;
        best = best.max(xz / (xy + yz)).max(xz / (0.0 + xz));
    }
    Ok(QuasiTriangle {
        constant: best,
        samples,
        seed,
    })
}
