use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::index_algebra::KappaWeight;

/// Scale `t > 0` with `|t theta|_kappa = 1`, by bisection (the map is monotone in `t`).
pub fn project_to_sphere(theta: &[f64], kappa: &KappaWeight) -> Vec<f64> {
    let norm = |t: f64| -> f64 {
        let x: Vec<f64> = theta.iter().map(|v| v * t).collect();
        kappa.norm(&x)
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while norm(hi) < 1.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if norm(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    theta.iter().map(|v| v * t).collect()
}

fn normalize(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if len == 0.0 || !len.is_finite() {
        return None;
    }
    for x in &mut v {
        *x /= len;
    }
    Some(v)
}

/// Deterministic sample of the unit kappa-sphere.
///
/// Directions are drawn uniformly on the Euclidean sphere (plus the `2n`
/// coordinate directions) and pushed radially onto `|xi|_kappa = 1`.
#[derive(Debug, Clone)]
pub struct KappaSphere {
    kappa: KappaWeight,
    directions: Vec<Vec<f64>>,
    points: Vec<Vec<f64>>,
    seed: u64,
}

impl KappaSphere {
    pub fn new(kappa: &KappaWeight, resolution: usize, seed: u64) -> Self {
        let n = kappa.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut directions = Vec::with_capacity(resolution + 2 * n);
        for l in 0..n {
            for sign in [1.0, -1.0] {
                let mut e = vec![0.0; n];
                e[l] = sign;
                directions.push(e);
            }
        }
        while directions.len() < resolution + 2 * n {
            let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            if let Some(d) = normalize(v) {
                directions.push(d);
            }
        }
        let points = directions.iter().map(|d| project_to_sphere(d, kappa)).collect();
        Self {
            kappa: kappa.clone(),
            directions,
            points,
            seed,
        }
    }

    /// `4096 n` samples, the default certificate resolution.
    pub fn default_resolution(n: usize) -> usize {
        4096 * n
    }

    pub fn kappa(&self) -> &KappaWeight {
        &self.kappa
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Typical angular gap between neighbouring directions.
    pub fn spacing(&self) -> f64 {
        let n = self.kappa.dim().max(2) as f64;
        (2.0 * std::f64::consts::PI / (self.points.len() as f64).powf(1.0 / (n - 1.0))).min(0.5)
    }

    /// Coordinate search over directions starting at `start`. `better(a, b)`
    /// returns true when value `a` improves on `b`.
    pub fn refine(
        &self,
        start: usize,
        iters: usize,
        f: impl Fn(&[f64]) -> f64,
        better: impl Fn(f64, f64) -> bool,
    ) -> (Vec<f64>, f64) {
        let n = self.kappa.dim();
        let mut dir = self.directions[start].clone();
        let mut point = self.points[start].clone();
        let mut value = f(&point);
        let mut step = self.spacing();
        for _ in 0..iters {
            let mut improved = false;
            for l in 0..n {
                for sign in [1.0, -1.0] {
                    let mut cand = dir.clone();
                    cand[l] += sign * step;
                    let Some(cand) = normalize(cand) else { continue };
                    let p = project_to_sphere(&cand, &self.kappa);
                    let v = f(&p);
                    if better(v, value) {
                        dir = cand;
                        point = p;
                        value = v;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        (point, value)
    }
}
