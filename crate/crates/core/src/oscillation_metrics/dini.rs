use std::fmt::Write as _;

use serde::Serialize;

use super::OscillationProfile;
use crate::error::{Error, Result};

/// `r` below `rho_min / EXTRAPOLATION_WARNING_RATIO` triggers a warning.
pub const EXTRAPOLATION_WARNING_RATIO: f64 = 10.0;
const NODES_PER_DECADE: f64 = 200.0;
const MIN_NODES: usize = 64;

/// Small-scale and tail Dini integrals of a tabulated modulus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiniReport {
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub gamma: f64,
    /// `int_0^r omega(rho) / rho drho`
    pub small_scale_integral: f64,
    /// `r^gamma int_r^R omega(rho) / rho^(1 + gamma) drho`
    pub tail_integral: f64,
    /// Share of the small-scale integral that comes from the linear
    /// extrapolation below the first tabulated radius.
    pub extrapolated_fraction: f64,
    pub warning: Option<String>,
}

impl DiniReport {
    pub fn total(&self) -> f64 {
        self.small_scale_integral + self.tail_integral
    }

    pub fn csv_header() -> &'static str {
        "r,R,gamma,small_scale,tail"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:e},{:e},{:e},{:e},{:e}",
            self.r, self.big_r, self.gamma, self.small_scale_integral, self.tail_integral
        )
    }

    pub fn to_csv(reports: &[DiniReport]) -> String {
        let mut s = format!("{}\n", Self::csv_header());
        for r in reports {
            let _ = writeln!(s, "{}", r.csv_row());
        }
        s
    }
}

/// Piecewise interpolation of the profile: log-log between tabulated radii
/// (linear where a value vanishes), linear through the origin below the
/// first radius, flat above the last.
pub(super) fn interpolate(p: &OscillationProfile, rho: f64) -> f64 {
    let (radii, values) = (&p.radii, &p.values);
    if rho <= radii[0] {
        return values[0] * rho / radii[0];
    }
    let last = radii.len() - 1;
    if rho >= radii[last] {
        return values[last];
    }
    let k = radii.partition_point(|&r| r <= rho) - 1;
    let (r0, r1, v0, v1) = (radii[k], radii[k + 1], values[k], values[k + 1]);
    if v0 > 0.0 && v1 > 0.0 {
        let s = (rho / r0).ln() / (r1 / r0).ln();
        (v0.ln() + s * (v1 / v0).ln()).exp()
    } else {
        v0 + (v1 - v0) * (rho - r0) / (r1 - r0)
    }
}

/// Trapezoid rule in `t = ln rho` for `int_a^b g(rho) drho / rho`.
fn log_trapezoid(a: f64, b: f64, g: impl Fn(f64) -> f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let span = (b / a).ln();
    let nodes = ((span / std::f64::consts::LN_10 * NODES_PER_DECADE).ceil() as usize).max(MIN_NODES);
    let h = span / nodes as f64;
    let mut acc = 0.5 * (g(a) + g(b));
    for i in 1..nodes {
        acc += g(a * (h * i as f64).exp());
    }
    acc * h
}

pub fn dini_integrals(profile: &OscillationProfile, r: f64, big_r: f64, gamma: f64) -> Result<DiniReport> {
    if !(r > 0.0 && r <= big_r && big_r.is_finite()) {
        return Err(Error::Domain(format!("need 0 < r <= R, got r = {r}, R = {big_r}")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Domain(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let rho_min = profile.radii[0];
    let omega = |rho: f64| interpolate(profile, rho);
    // below rho_min the extrapolation omega(rho_min) rho / rho_min integrates exactly
    let cut = r.min(rho_min);
    let extrapolated = profile.values[0] * cut / rho_min;
    let tabulated = log_trapezoid(rho_min, r, omega);
    let small = extrapolated + tabulated;
    let tail = r.powf(gamma) * log_trapezoid(r, big_r, |rho| omega(rho) * rho.powf(-gamma));
    let mut warning = None;
    if r < rho_min / EXTRAPOLATION_WARNING_RATIO {
        warning = Some(format!(
            "r = {r:e} is more than {EXTRAPOLATION_WARNING_RATIO} times below the smallest tabulated radius {rho_min:e}; the small-scale integral is extrapolation-dominated"
        ));
    }
    Ok(DiniReport {
        r,
        big_r,
        gamma,
        small_scale_integral: small,
        tail_integral: tail,
        extrapolated_fraction: if small > 0.0 { extrapolated / small } else { 0.0 },
        warning,
    })
}
