use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Periodic tensor grid. Axis `l` carries `sizes[l]` samples at
/// `x_l = i * periods[l] / sizes[l]`; storage is row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    sizes: Vec<usize>,
    periods: Vec<f64>,
}

impl GridSpec {
    pub fn new(sizes: Vec<usize>, periods: Vec<f64>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::Domain("grid needs at least one axis".into()));
        }
        check_dim(sizes.len(), periods.len())?;
        for &s in &sizes {
            if s < 4 || !s.is_power_of_two() {
                return Err(Error::Domain(format!(
                    "grid sizes must be powers of two >= 4, got {s}"
                )));
            }
        }
        for &p in &periods {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::Domain(format!("grid periods must be positive, got {p}")));
            }
        }
        Ok(Self { sizes, periods })
    }

    /// `2 pi`-periodic grid with the same size on every axis.
    pub fn torus(n: usize, size: usize) -> Result<Self> {
        Self::new(vec![size; n], vec![2.0 * PI; n])
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, l: usize) -> f64 {
        self.periods[l] / self.sizes[l] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|l| self.spacing(l)).product()
    }

    pub fn volume(&self) -> f64 {
        self.periods.iter().product()
    }

    pub(crate) fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dim()];
        for l in (0..self.dim().saturating_sub(1)).rev() {
            strides[l] = strides[l + 1] * self.sizes[l + 1];
        }
        strides
    }

    /// Multi-index of a flat position.
    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for l in (0..self.dim()).rev() {
            idx[l] = flat % self.sizes[l];
            flat /= self.sizes[l];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.sizes)
            .fold(0, |acc, (&i, &s)| acc * s + (i % s))
    }

    /// Physical coordinates of a grid point.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat)
            .iter()
            .enumerate()
            .map(|(l, &i)| i as f64 * self.spacing(l))
            .collect()
    }

    /// Signed integer frequency of FFT bin `i` along an axis of size `s`.
    pub fn signed_mode(i: usize, s: usize) -> i64 {
        if i < s / 2 {
            i as i64
        } else {
            i as i64 - s as i64
        }
    }

    /// Angular wavenumber of bin `i` on axis `l`.
    pub fn wavenumber(&self, l: usize, i: usize) -> f64 {
        2.0 * PI * Self::signed_mode(i, self.sizes[l]) as f64 / self.periods[l]
    }

    /// Wave vectors of every lattice mode, flattened (`len() * dim()` entries).
    pub fn wavevectors(&self) -> Vec<f64> {
        let n = self.dim();
        let axes: Vec<Vec<f64>> = (0..n)
            .map(|l| (0..self.sizes[l]).map(|i| self.wavenumber(l, i)).collect())
            .collect();
        let mut out = Vec::with_capacity(self.len() * n);
        for flat in 0..self.len() {
            let idx = self.unravel(flat);
            for l in 0..n {
                out.push(axes[l][idx[l]]);
            }
        }
        out
    }

    /// Same sample counts, with each period scaled by `factors[l]`.
    pub fn rescaled(&self, factors: &[f64]) -> Result<Self> {
        check_dim(self.dim(), factors.len())?;
        Self::new(
            self.sizes.clone(),
            self.periods.iter().zip(factors).map(|(p, f)| p * f).collect(),
        )
    }

    pub fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::Contract(format!(
                "grid mismatch: {:?}/{:?} vs {:?}/{:?}",
                self.sizes, self.periods, other.sizes, other.periods
            )))
        }
    }
}

/// Complex samples of a function on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    spec: GridSpec,
    values: Vec<Complex64>,
}

impl GridField {
    pub fn new(spec: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::Contract(format!(
                "field has {} samples, grid needs {}",
                values.len(),
                spec.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Contract("field samples must be finite".into()));
        }
        Ok(Self { spec, values })
    }

    pub fn zeros(spec: &GridSpec) -> Self {
        Self {
            spec: spec.clone(),
            values: vec![Complex64::new(0.0, 0.0); spec.len()],
        }
    }

    pub fn constant(spec: &GridSpec, c: Complex64) -> Self {
        Self {
            spec: spec.clone(),
            values: vec![c; spec.len()],
        }
    }

    pub fn from_fn(spec: &GridSpec, mut f: impl FnMut(&[f64]) -> Complex64) -> Self {
        let values = (0..spec.len()).map(|i| f(&spec.point(i))).collect();
        Self {
            spec: spec.clone(),
            values,
        }
    }

    pub fn from_real_fn(spec: &GridSpec, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        Self::from_fn(spec, |x| Complex64::new(f(x), 0.0))
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            spec: self.spec.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(
        &self,
        other: &GridField,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self> {
        self.spec.check_same(&other.spec)?;
        Ok(Self {
            spec: self.spec.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &GridField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &GridField) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|v| v * c)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Discrete `L^2` norm with cell-volume weights.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.spec.cell_volume()).sqrt()
    }

    pub fn mean(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.values.len() as f64
    }

    /// Unnormalized forward transform.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut data = self.values.clone();
        transform(&self.spec, &mut data, Direction::Forward);
        data
    }

    /// Inverse of [`GridField::spectrum`], scaled by `1 / N`.
    pub fn from_spectrum(spec: &GridSpec, mut spectrum: Vec<Complex64>) -> Result<Self> {
        if spectrum.len() != spec.len() {
            return Err(Error::Contract("spectrum length does not match grid".into()));
        }
        transform(spec, &mut spectrum, Direction::Inverse);
        let scale = 1.0 / spec.len() as f64;
        for v in &mut spectrum {
            *v *= scale;
        }
        Self::new(spec.clone(), spectrum)
    }

    /// Trigonometric interpolant at an arbitrary point. Nyquist modes are
    /// split symmetrically so real data interpolate to real values.
    pub fn interpolate(&self, x: &[f64]) -> Result<Complex64> {
        check_dim(self.spec.dim(), x.len())?;
        let spec = &self.spec;
        let n = spec.dim();
        // on-grid points return the sample itself
        let mut on_grid = Vec::with_capacity(n);
        for l in 0..n {
            let t = x[l] / spec.spacing(l);
            let r = t.round();
            if (t - r).abs() < 1e-12 {
                on_grid.push((r as i64).rem_euclid(spec.sizes()[l] as i64) as usize);
            } else {
                break;
            }
        }
        if on_grid.len() == n {
            return Ok(self.values[spec.ravel(&on_grid)]);
        }
        let hat = self.spectrum();
        let basis: Vec<Vec<Complex64>> = (0..n)
            .map(|l| {
                let s = spec.sizes()[l];
                (0..s)
                    .map(|i| {
                        let xi = spec.wavenumber(l, i);
                        if i == s / 2 {
                            Complex64::new((xi * x[l]).cos(), 0.0)
                        } else {
                            Complex64::from_polar(1.0, xi * x[l])
                        }
                    })
                    .collect()
            })
            .collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for (flat, h) in hat.iter().enumerate() {
            let idx = spec.unravel(flat);
            let mut e = Complex64::new(1.0, 0.0);
            for l in 0..n {
                e *= basis[l][idx[l]];
            }
            acc += h * e;
        }
        Ok(acc / spec.len() as f64)
    }
}

#[derive(Clone, Copy)]
enum Direction {
    Forward,
    Inverse,
}

fn transform(spec: &GridSpec, data: &mut [Complex64], dir: Direction) {
    let mut planner = FftPlanner::<f64>::new();
    let strides = spec.strides();
    let total = spec.len();
    for l in 0..spec.dim() {
        let size = spec.sizes()[l];
        let stride = strides[l];
        let fft = match dir {
            Direction::Forward => planner.plan_fft_forward(size),
            Direction::Inverse => planner.plan_fft_inverse(size),
        };
        let mut line = vec![Complex64::new(0.0, 0.0); size];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        // every line along axis l starts at an offset whose l-th index is zero
        for start in 0..total {
            if !(start / stride).is_multiple_of(size) {
                continue;
            }
            for (i, v) in line.iter_mut().enumerate() {
                *v = data[start + i * stride];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for (i, v) in line.iter().enumerate() {
                data[start + i * stride] = *v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec2() -> GridSpec {
        GridSpec::new(vec![8, 16], vec![2.0 * PI, 3.0]).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(vec![6], vec![1.0]).is_err());
        assert!(GridSpec::new(vec![2], vec![1.0]).is_err());
        assert!(GridSpec::new(vec![8], vec![0.0]).is_err());
        assert!(GridSpec::new(vec![8, 8], vec![1.0]).is_err());
    }

    #[test]
    fn ravel_roundtrip() {
        let s = spec2();
        for flat in 0..s.len() {
            assert_eq!(s.ravel(&s.unravel(flat)), flat);
        }
        assert_eq!(s.strides(), vec![16, 1]);
    }

    #[test]
    fn fft_roundtrip_and_normalization() {
        let s = spec2();
        let f = GridField::from_fn(&s, |x| Complex64::new(x[0].sin() + x[1], x[0] * x[1]));
        let hat = f.spectrum();
        // DC bin is the plain sum
        let sum: Complex64 = f.values().iter().sum();
        assert!((hat[0] - sum).norm() < 1e-10);
        let back = GridField::from_spectrum(&s, hat).unwrap();
        assert!(back.sub(&f).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn single_mode_lands_in_its_bin() {
        let s = GridSpec::torus(2, 8).unwrap();
        let f = GridField::from_fn(&s, |x| Complex64::from_polar(1.0, 2.0 * x[0] - 3.0 * x[1]));
        let hat = f.spectrum();
        let bin = s.ravel(&[2, 8 - 3]);
        assert!((hat[bin] - Complex64::new(64.0, 0.0)).norm() < 1e-10);
        assert_eq!(s.wavenumber(1, 5), -3.0);
    }

    #[test]
    fn interpolation_is_exact_for_band_limited_data() {
        let s = spec2();
        let g = |x: &[f64]| (2.0 * x[0]).cos() + (2.0 * PI * x[1] / 3.0 * 3.0).sin();
        let f = GridField::from_real_fn(&s, g);
        let x = [0.37, 1.234];
        let v = f.interpolate(&x).unwrap();
        assert!((v.re - g(&x)).abs() < 1e-12 && v.im.abs() < 1e-12);
        assert_eq!(f.interpolate(&s.point(5)).unwrap(), f.values()[5]);
    }
}
