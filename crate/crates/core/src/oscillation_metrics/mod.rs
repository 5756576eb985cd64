//! Moduli of oscillation on periodic grids, Dini integrals, seminorms and
//! Campanato quantities.
//!
//! Distances are periodic: along each axis the offset is reduced to the
//! nearest lattice translate before the kappa-distance is formed.

mod dini;
mod seminorm;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use dini::{dini_integrals, DiniReport, EXTRAPOLATION_WARNING_RATIO};
pub use seminorm::{campanato_phi, seminorm, CampanatoPhi, Exponent, CAMPANATO_BUDGET};

use crate::error::{check_dim, Error, Result};
use crate::index_algebra::{axis_term, KappaWeight, DEFAULT_SEED};
use crate::spectral_solver::{GridField, GridSpec};

/// Total grid size above which pair scans are subsampled.
pub const FULL_SCAN_LIMIT: usize = 1 << 16;
/// Number of random pairs used by subsampled scans.
pub const SAMPLED_PAIRS: usize = 1_000_000;

/// `|x - y|_kappa` with every axis reduced modulo its period.
pub fn periodic_kappa_distance(x: &[f64], y: &[f64], kappa: &KappaWeight, periods: &[f64]) -> Result<f64> {
    check_dim(kappa.dim(), x.len())?;
    check_dim(kappa.dim(), y.len())?;
    check_dim(kappa.dim(), periods.len())?;
    Ok((0..x.len())
        .map(|l| {
            let d = (x[l] - y[l]).rem_euclid(periods[l]);
            axis_term(d.min(periods[l] - d), kappa.get(l))
        })
        .sum::<f64>()
        .sqrt())
}

/// Largest periodic kappa-distance on the grid (half period on every axis).
pub fn max_periodic_distance(spec: &GridSpec, kappa: &KappaWeight) -> f64 {
    (0..spec.dim())
        .map(|l| axis_term(spec.periods()[l] / 2.0, kappa.get(l)))
        .sum::<f64>()
        .sqrt()
}

/// Smallest nonzero kappa-distance between grid points.
pub fn min_grid_distance(spec: &GridSpec, kappa: &KappaWeight) -> f64 {
    (0..spec.dim())
        .map(|l| axis_term(spec.spacing(l), kappa.get(l)).sqrt())
        .fold(f64::INFINITY, f64::min)
}

/// Lattice offsets sorted by periodic kappa-length.
#[derive(Debug, Clone)]
pub(crate) struct OffsetTable {
    /// Per-axis offset in `0..size`.
    pub offsets: Vec<Vec<usize>>,
    pub lengths: Vec<f64>,
}

impl OffsetTable {
    /// Offsets with length `<= max_len`; `half` keeps one of each `+-o` pair.
    pub fn new(spec: &GridSpec, kappa: &KappaWeight, max_len: f64, half: bool) -> Self {
        let n = spec.dim();
        let axis_len: Vec<Vec<f64>> = (0..n)
            .map(|l| {
                let s = spec.sizes()[l];
                (0..s)
                    .map(|i| {
                        let m = i.min(s - i) as f64 * spec.spacing(l);
                        axis_term(m, kappa.get(l))
                    })
                    .collect()
            })
            .collect();
        let mut entries: Vec<(f64, usize)> = Vec::new();
        let limit = max_len * max_len;
        for flat in 0..spec.len() {
            let idx = spec.unravel(flat);
            if half && flat != 0 {
                let neg: Vec<usize> = idx
                    .iter()
                    .zip(spec.sizes())
                    .map(|(&i, &s)| (s - i) % s)
                    .collect();
                if spec.ravel(&neg) < flat {
                    continue;
                }
            }
            let sq: f64 = (0..n).map(|l| axis_len[l][idx[l]]).sum();
            if sq <= limit * (1.0 + 1e-12) {
                entries.push((sq.sqrt(), flat));
            }
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Self {
            offsets: entries.iter().map(|&(_, f)| spec.unravel(f)).collect(),
            lengths: entries.iter().map(|&(d, _)| d).collect(),
        }
    }

    /// Number of offsets of length `<= r`.
    pub fn count_within(&self, r: f64) -> usize {
        self.lengths.partition_point(|&d| d <= r * (1.0 + 1e-12))
    }
}

/// Per-axis coordinates of every sample, for fast shifted indexing.
struct Lattice {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    coords: Vec<Vec<usize>>,
}

impl Lattice {
    fn new(spec: &GridSpec) -> Self {
        let n = spec.dim();
        let mut coords = vec![Vec::with_capacity(spec.len()); n];
        for flat in 0..spec.len() {
            for (l, i) in spec.unravel(flat).into_iter().enumerate() {
                coords[l].push(i);
            }
        }
        let sizes = spec.sizes().to_vec();
        let mut strides = vec![1; n];
        for l in (0..n.saturating_sub(1)).rev() {
            strides[l] = strides[l + 1] * sizes[l + 1];
        }
        Self { sizes, strides, coords }
    }

    #[inline]
    fn shift(&self, flat: usize, offset: &[usize]) -> usize {
        let mut out = 0;
        for l in 0..self.sizes.len() {
            let mut i = self.coords[l][flat] + offset[l];
            if i >= self.sizes[l] {
                i -= self.sizes[l];
            }
            out += i * self.strides[l];
        }
        out
    }
}

/// Which modulus a profile tabulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    SupOscillation,
    MeanOscillation,
}

impl ProfileKind {
    fn label(self) -> &'static str {
        match self {
            Self::SupOscillation => "sup_oscillation",
            Self::MeanOscillation => "mean_oscillation",
        }
    }
}

/// Binned modulus `rho -> omega(rho)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OscillationProfile {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: ProfileKind,
    /// True when built from random pairs instead of a full scan.
    pub sampled: bool,
    /// Radii dropped because their balls held the center only.
    pub skipped: Vec<f64>,
}

impl OscillationProfile {
    pub fn new(radii: Vec<f64>, values: Vec<f64>, kind: ProfileKind) -> Result<Self> {
        if radii.len() != values.len() || radii.is_empty() {
            return Err(Error::Domain("profile needs matching, nonempty radii and values".into()));
        }
        if radii.windows(2).any(|w| w[0] >= w[1]) || radii[0] <= 0.0 {
            return Err(Error::Domain("profile radii must be positive and increasing".into()));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Domain("profile values must be finite and nonnegative".into()));
        }
        Ok(Self {
            radii,
            values,
            kind,
            sampled: false,
            skipped: Vec::new(),
        })
    }

    /// Tabulates `omega` at `radii`.
    pub fn from_fn(radii: Vec<f64>, kind: ProfileKind, omega: impl Fn(f64) -> f64) -> Result<Self> {
        let values = radii.iter().map(|&r| omega(r)).collect();
        Self::new(radii, values, kind)
    }

    /// Value at `rho` by the interpolation used for the Dini integrals.
    pub fn value_at(&self, rho: f64) -> f64 {
        dini::interpolate(self, rho)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("rho,omega,kind\n");
        for (r, v) in self.radii.iter().zip(&self.values) {
            let _ = writeln!(s, "{r:e},{v:e},{}", self.kind.label());
        }
        s
    }
}

/// `bins` radii spaced geometrically from the grid spacing to the largest
/// periodic distance.
pub fn default_radii(spec: &GridSpec, kappa: &KappaWeight, bins: usize) -> Vec<f64> {
    let lo = min_grid_distance(spec, kappa);
    let hi = max_periodic_distance(spec, kappa);
    log_spaced(lo, hi, bins.max(2))
}

pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![hi];
    }
    let ratio = (hi / lo).ln();
    (0..count)
        .map(|i| lo * (ratio * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Grid points within periodic kappa-distance `r` of `center`.
pub fn ball_indices(spec: &GridSpec, kappa: &KappaWeight, center: &[f64], r: f64) -> Result<Vec<usize>> {
    check_dim(spec.dim(), center.len())?;
    let n = spec.dim();
    let axis: Vec<Vec<f64>> = (0..n)
        .map(|l| {
            let p = spec.periods()[l];
            (0..spec.sizes()[l])
                .map(|i| {
                    let d = (i as f64 * spec.spacing(l) - center[l]).rem_euclid(p);
                    axis_term(d.min(p - d), kappa.get(l))
                })
                .collect()
        })
        .collect();
    let limit = r * r * (1.0 + 1e-12);
    Ok((0..spec.len())
        .filter(|&flat| {
            let idx = spec.unravel(flat);
            (0..n).map(|l| axis[l][idx[l]]).sum::<f64>() <= limit
        })
        .collect())
}

/// Region of a grid over which a difference or seminorm is taken.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Region {
    Full,
    Ball { center: Vec<f64>, radius: f64 },
}

impl Region {
    pub fn indices(&self, spec: &GridSpec, kappa: &KappaWeight) -> Result<Vec<usize>> {
        match self {
            Self::Full => Ok((0..spec.len()).collect()),
            Self::Ball { center, radius } => ball_indices(spec, kappa, center, *radius),
        }
    }
}

fn diff(values: &[num_complex::Complex64], a: usize, b: usize) -> f64 {
    (values[a] - values[b]).norm()
}

/// `omega(rho) = max |f(x) - f(y)|` over pairs in `region` with periodic
/// distance `<= rho`, for every radius in `radii` (increasing).
pub fn region_profile(f: &GridField, kappa: &KappaWeight, region: &Region, radii: &[f64]) -> Result<OscillationProfile> {
    let spec = f.spec();
    check_dim(kappa.dim(), spec.dim())?;
    let Some(&r_max) = radii.last() else {
        return Err(Error::Domain("no radii requested".into()));
    };
    let members = region.indices(spec, kappa)?;
    let mut inside = vec![false; spec.len()];
    for &m in &members {
        inside[m] = true;
    }
    let table = OffsetTable::new(spec, kappa, r_max, true);
    let lattice = Lattice::new(spec);
    let values = f.values();
    let sampled = spec.len() > FULL_SCAN_LIMIT;
    // per-offset maximum difference, in order of increasing length
    let per_offset: Vec<f64> = if sampled {
        let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
        let mut best = vec![0.0f64; table.offsets.len()];
        for _ in 0..SAMPLED_PAIRS {
            let o = rng.random_range(0..table.offsets.len());
            let x = members[rng.random_range(0..members.len())];
            let y = lattice.shift(x, &table.offsets[o]);
            if inside[y] {
                best[o] = best[o].max(diff(values, x, y));
            }
        }
        best
    } else {
        table
            .offsets
            .par_iter()
            .map(|o| {
                let mut best = 0.0f64;
                for &x in &members {
                    let y = lattice.shift(x, o);
                    if inside[y] {
                        best = best.max(diff(values, x, y));
                    }
                }
                best
            })
            .collect()
    };
    let mut out = Vec::with_capacity(radii.len());
    let mut running = 0.0f64;
    let mut next = 0;
    for &r in radii {
        let end = table.count_within(r);
        while next < end {
            running = running.max(per_offset[next]);
            next += 1;
        }
        out.push(running);
    }
    let mut profile = OscillationProfile::new(radii.to_vec(), out, ProfileKind::SupOscillation)?;
    profile.sampled = sampled;
    Ok(profile)
}

/// Sup-oscillation modulus of `f` over the whole torus at `bins` default radii.
pub fn oscillation_profile(f: &GridField, kappa: &KappaWeight, bins: usize) -> Result<OscillationProfile> {
    let radii = default_radii(f.spec(), kappa, bins);
    region_profile(f, kappa, &Region::Full, &radii)
}

/// `max |f(x) - f(y)|` over pairs in `region` at distance `<= r`.
pub fn sup_difference(f: &GridField, kappa: &KappaWeight, region: &Region, r: f64) -> Result<f64> {
    Ok(region_profile(f, kappa, region, &[r])?.values[0])
}

/// Default centers for mean oscillations: every grid point, thinned by a
/// uniform stride per axis to at most `limit` points.
pub fn default_centers(spec: &GridSpec, limit: usize) -> Vec<usize> {
    let mut stride = vec![1usize; spec.dim()];
    let count = |s: &[usize]| -> usize { spec.sizes().iter().zip(s).map(|(n, s)| n.div_ceil(*s)).product() };
    let mut l = 0;
    while count(&stride) > limit {
        stride[l] *= 2;
        l = (l + 1) % spec.dim();
    }
    (0..spec.len())
        .filter(|&flat| spec.unravel(flat).iter().zip(&stride).all(|(i, s)| i % s == 0))
        .collect()
}

/// `max_{x0} sum_labels mean_{B_rho(x0)} |a(x) - a(x0)|` over `centers`
/// (grid indices), at each radius. Radii whose balls hold the center only
/// are skipped and listed in the profile.
pub fn mean_oscillation_profile(
    fields: &BTreeMap<String, GridField>,
    kappa: &KappaWeight,
    radii: &[f64],
    centers: &[usize],
) -> Result<OscillationProfile> {
    let Some(first) = fields.values().next() else {
        return Err(Error::Domain("no fields given".into()));
    };
    let spec = first.spec().clone();
    for f in fields.values() {
        spec.check_same(f.spec())?;
    }
    check_dim(kappa.dim(), spec.dim())?;
    let Some(&r_max) = radii.last() else {
        return Err(Error::Domain("no radii requested".into()));
    };
    let table = OffsetTable::new(&spec, kappa, r_max, false);
    let lattice = Lattice::new(&spec);
    let counts: Vec<usize> = radii.iter().map(|&r| table.count_within(r)).collect();
    let per_center: Vec<Vec<f64>> = centers
        .par_iter()
        .map(|&c| {
            let mut acc = vec![0.0; table.offsets.len() + 1];
            for (k, o) in table.offsets.iter().enumerate() {
                let y = lattice.shift(c, o);
                let s: f64 = fields.values().map(|f| diff(f.values(), y, c)).sum();
                acc[k + 1] = acc[k] + s;
            }
            counts
                .iter()
                .map(|&m| if m > 1 { acc[m] / m as f64 } else { 0.0 })
                .collect()
        })
        .collect();
    let mut radii_out = Vec::new();
    let mut values = Vec::new();
    let mut skipped = Vec::new();
    for (i, (&r, &m)) in radii.iter().zip(&counts).enumerate() {
        if m <= 1 {
            skipped.push(r);
            continue;
        }
        radii_out.push(r);
        values.push(per_center.iter().map(|v| v[i]).fold(0.0, f64::max));
    }
    if radii_out.is_empty() {
        return Err(Error::Domain("every requested ball is below the grid spacing".into()));
    }
    let mut profile = OscillationProfile::new(radii_out, values, ProfileKind::MeanOscillation)?;
    profile.skipped = skipped;
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn brute_profile(f: &GridField, kappa: &KappaWeight, radii: &[f64]) -> Vec<f64> {
        let spec = f.spec();
        let pts: Vec<Vec<f64>> = (0..spec.len()).map(|i| spec.point(i)).collect();
        radii
            .iter()
            .map(|&r| {
                let mut best = 0.0f64;
                for i in 0..spec.len() {
                    for j in 0..spec.len() {
                        let d = periodic_kappa_distance(&pts[i], &pts[j], kappa, spec.periods()).unwrap();
                        if d <= r * (1.0 + 1e-12) {
                            best = best.max((f.values()[i] - f.values()[j]).norm());
                        }
                    }
                }
                best
            })
            .collect()
    }

    #[test]
    fn periodic_distance_wraps() {
        let k = KappaWeight::new(vec![1, 2]).unwrap();
        let d = periodic_kappa_distance(&[0.1, 0.0], &[2.0 * PI - 0.1, 0.0], &k, &[2.0 * PI, 2.0 * PI]).unwrap();
        assert!((d - 0.2).abs() < 1e-12);
        let d = periodic_kappa_distance(&[0.0, 0.0], &[0.0, 0.25], &k, &[1.0, 1.0]).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn constant_field_has_no_oscillation() {
        let spec = GridSpec::torus(2, 8).unwrap();
        let k = KappaWeight::new(vec![1, 2]).unwrap();
        let p = oscillation_profile(&GridField::constant(&spec, Complex64::new(3.0, 1.0)), &k, 10).unwrap();
        assert!(p.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sine_profile_matches_brute_force() {
        let spec = GridSpec::torus(1, 32).unwrap();
        let k = KappaWeight::new(vec![1]).unwrap();
        let f = GridField::from_real_fn(&spec, |x| x[0].sin());
        let radii = default_radii(&spec, &k, 12);
        let p = oscillation_profile(&f, &k, 12).unwrap();
        let brute = brute_profile(&f, &k, &radii);
        for ((a, b), r) in p.values.iter().zip(&brute).zip(&radii) {
            assert!((a - b).abs() < 1e-14);
            // largest lattice offset inside the radius
            let h = 2.0 * PI / 32.0;
            let reach = ((r / h + 1e-9).floor() * h).min(PI);
            let exact = 2.0 * (reach / 2.0).sin();
            // the pair midpoints sit half a cell off the crest
            assert!(*a <= exact + 1e-12 && exact - a <= exact * h * h / 8.0 + 1e-12, "{r}: {a} vs {exact}");
        }
        assert!(p.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn anisotropic_profile_matches_brute_force() {
        let spec = GridSpec::new(vec![8, 16], vec![2.0 * PI, 3.0]).unwrap();
        let k = KappaWeight::new(vec![1, 2]).unwrap();
        let f = GridField::from_real_fn(&spec, |x| x[0].cos() * (2.0 * PI * x[1] / 3.0).sin() + 0.3 * x[0].sin());
        let radii = default_radii(&spec, &k, 9);
        let p = region_profile(&f, &k, &Region::Full, &radii).unwrap();
        let brute = brute_profile(&f, &k, &radii);
        for (a, b) in p.values.iter().zip(&brute) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn linear_function_is_lipschitz() {
        // f(x) = x on [0, 1) away from the wrap-around seam
        let spec = GridSpec::new(vec![256], vec![1.0]).unwrap();
        let k = KappaWeight::new(vec![1]).unwrap();
        let f = GridField::from_real_fn(&spec, |x| x[0]);
        let region = Region::Ball {
            center: vec![0.5],
            radius: 0.3,
        };
        for r in [0.05, 0.1, 0.2] {
            let v = sup_difference(&f, &k, &region, r).unwrap();
            assert!((v - r).abs() <= 1.0 / 256.0 + 1e-12, "{r}: {v}");
        }
    }

    #[test]
    fn sup_difference_of_sine() {
        let spec = GridSpec::torus(1, 64).unwrap();
        let k = KappaWeight::new(vec![1]).unwrap();
        let f = GridField::from_real_fn(&spec, |x| x[0].sin());
        let v = sup_difference(&f, &k, &Region::Full, PI).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        let c = sup_difference(&GridField::zeros(&spec), &k, &Region::Full, 1.0).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn mean_oscillation_of_identity() {
        let spec = GridSpec::new(vec![512], vec![1.0]).unwrap();
        let k = KappaWeight::new(vec![1]).unwrap();
        let a = GridField::from_real_fn(&spec, |x| x[0]);
        let fields = BTreeMap::from([("a".to_string(), a)]);
        let center = spec.ravel(&[256]);
        let radii = [1e-4, 0.05, 0.1, 0.2];
        let p = mean_oscillation_profile(&fields, &k, &radii, &[center]).unwrap();
        assert_eq!(p.skipped, vec![1e-4]);
        for (r, v) in p.radii.iter().zip(&p.values) {
            assert!((v - r / 2.0).abs() < 2.0 / 512.0, "{r}: {v}");
        }
    }

    #[test]
    fn mean_oscillation_matches_direct_summation() {
        let spec = GridSpec::torus(2, 16).unwrap();
        let k = KappaWeight::new(vec![1, 2]).unwrap();
        let a = GridField::from_real_fn(&spec, |x| 0.05 * x[0].sin());
        let fields = BTreeMap::from([("a".to_string(), a.clone())]);
        let radii = [0.5, 1.0, 2.0];
        let centers = default_centers(&spec, 1 << 20);
        let p = mean_oscillation_profile(&fields, &k, &radii, &centers).unwrap();
        for (i, &r) in radii.iter().enumerate() {
            let mut best = 0.0f64;
            for &c in &centers {
                let x0 = spec.point(c);
                let ball = ball_indices(&spec, &k, &x0, r).unwrap();
                let mean = ball.iter().map(|&j| (a.values()[j] - a.values()[c]).norm()).sum::<f64>() / ball.len() as f64;
                best = best.max(mean);
            }
            assert!((p.values[i] - best).abs() < 1e-12);
        }
        for (r, v) in p.radii.iter().zip(&p.values) {
            assert!(*v <= sup_at(&a, &k, *r) + 1e-15);
        }
    }

    fn sup_at(f: &GridField, k: &KappaWeight, r: f64) -> f64 {
        sup_difference(f, k, &Region::Full, r).unwrap()
    }

    #[test]
    fn default_centers_thin_out() {
        let spec = GridSpec::torus(2, 64).unwrap();
        assert_eq!(default_centers(&spec, 1 << 20).len(), 4096);
        assert_eq!(default_centers(&spec, 1024).len(), 1024);
    }

    #[test]
    fn csv_layout() {
        let p = OscillationProfile::from_fn(vec![0.1, 1.0], ProfileKind::SupOscillation, |r| r).unwrap();
        assert_eq!(p.to_csv().lines().next(), Some("rho,omega,kind"));
        assert!(p.to_csv().contains("sup_oscillation"));
    }
}
