//! Stationary covariance kernels: values, derivatives, spectral densities,
//! and numerical audits of the positivity / integrability / non-degeneracy
//! assumptions the rest of the crate relies on.
//!
//! All built-in families are isotropic, so every quantity reduces to the
//! radial profile `phi(r) = kernel value at |x| = r`.

use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Covariance kernel family and its parameters.
///
/// `Tabulated` carries a sampled radial profile `(radius, value)` starting at
/// radius 0, interpolated with a monotone cubic; it supports value and
/// gradient queries only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum KernelFamily {
    BargmannFock { length_scale: f64 },
    Cauchy { alpha: f64 },
    Tabulated { profile: Vec<(f64, f64)> },
}

/// A kernel together with the ambient dimension. Construct through
/// [`KernelSpec::new`] (or deserialization, which revalidates) so the
/// invariants hold: `kernel(0) > 0`, finite parameters, and for Cauchy
/// `alpha > d` so the kernel is integrable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSpec {
    #[serde(flatten)]
    family: KernelFamily,
    dimension: usize,
}

#[derive(Deserialize)]
struct KernelSpecRaw {
    #[serde(flatten)]
    family: KernelFamily,
    dimension: usize,
}

impl<'de> Deserialize<'de> for KernelSpec {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = KernelSpecRaw::deserialize(de)?;
        KernelSpec::new(raw.family, raw.dimension).map_err(serde::de::Error::custom)
    }
}

impl KernelSpec {
    pub fn new(family: KernelFamily, dimension: usize) -> Result<Self> {
        if !(1..=crate::grid::MAX_DIM).contains(&dimension) {
            return Err(Error::InvalidKernel(format!(
                "dimension must be 1..={}, got {dimension}",
                crate::grid::MAX_DIM
            )));
        }
        match &family {
            KernelFamily::BargmannFock { length_scale } => {
                if !(length_scale.is_finite() && *length_scale > 0.0) {
                    return Err(Error::InvalidKernel(format!(
                        "length_scale must be finite and positive, got {length_scale}"
                    )));
                }
            }
            KernelFamily::Cauchy { alpha } => {
                if !(alpha.is_finite() && *alpha > dimension as f64) {
                    return Err(Error::InvalidKernel(format!(
                        "Cauchy needs alpha > d = {dimension} for integrability, got {alpha}"
                    )));
                }
            }
            KernelFamily::Tabulated { profile } => {
                if profile.len() < 2 {
                    return Err(Error::InvalidKernel(
                        "tabulated profile needs at least 2 samples".into(),
                    ));
                }
                if profile[0].0 != 0.0 {
                    return Err(Error::InvalidKernel(format!(
                        "tabulated profile must start at radius 0, got {}",
                        profile[0].0
                    )));
                }
                if !(profile[0].1.is_finite() && profile[0].1 > 0.0) {
                    return Err(Error::InvalidKernel(format!(
                        "kernel value at 0 must be positive, got {}",
                        profile[0].1
                    )));
                }
                for w in profile.windows(2) {
                    if !(w[1].0.is_finite() && w[1].1.is_finite() && w[1].0 > w[0].0) {
                        return Err(Error::InvalidKernel(
                            "tabulated radii must be finite and strictly increasing".into(),
                        ));
                    }
                }
            }
        }
        Ok(KernelSpec { family, dimension })
    }

    pub fn bargmann_fock(length_scale: f64, dimension: usize) -> Result<Self> {
        KernelSpec::new(KernelFamily::BargmannFock { length_scale }, dimension)
    }

    pub fn cauchy(alpha: f64, dimension: usize) -> Result<Self> {
        KernelSpec::new(KernelFamily::Cauchy { alpha }, dimension)
    }

    pub fn tabulated(profile: Vec<(f64, f64)>, dimension: usize) -> Result<Self> {
        KernelSpec::new(KernelFamily::Tabulated { profile }, dimension)
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Short provenance string stored with samples and file headers.
    pub fn id(&self) -> String {
        match &self.family {
            KernelFamily::BargmannFock { length_scale } => {
                format!("bf:s={length_scale}:d={}", self.dimension)
            }
            KernelFamily::Cauchy { alpha } => format!("cauchy:a={alpha}:d={}", self.dimension),
            KernelFamily::Tabulated { profile } => format!(
                "tab:n={}:rmax={}:d={}",
                profile.len(),
                profile.last().unwrap().0,
                self.dimension
            ),
        }
    }

    /// Largest radius at which the kernel can be evaluated (tabulated
    /// profiles are clipped to their sampled range).
    pub fn max_radius(&self) -> f64 {
        match &self.family {
            KernelFamily::Tabulated { profile } => profile.last().unwrap().0,
            _ => f64::INFINITY,
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension {
            return Err(Error::InvalidKernel(format!(
                "point has dimension {}, kernel has {}",
                x.len(),
                self.dimension
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidKernel(format!("non-finite point {x:?}")));
        }
        Ok(())
    }

    /// Radial profile `phi(r)`.
    pub fn radial_value(&self, r: f64) -> Result<f64> {
        match &self.family {
            KernelFamily::BargmannFock { length_scale } => {
                let t = r / length_scale;
                Ok((-0.5 * t * t).exp())
            }
            KernelFamily::Cauchy { alpha } => Ok((1.0 + r * r).powf(-alpha / 2.0)),
            KernelFamily::Tabulated { profile } => {
                let interp = Pchip::new(profile);
                interp.value(r)
            }
        }
    }

    /// Radial derivative `phi'(r)`.
    pub fn radial_derivative(&self, r: f64) -> Result<f64> {
        match &self.family {
            KernelFamily::BargmannFock { length_scale } => {
                let s2 = length_scale * length_scale;
                Ok(-(r / s2) * self.radial_value(r)?)
            }
            KernelFamily::Cauchy { alpha } => {
                Ok(-alpha * r * (1.0 + r * r).powf(-alpha / 2.0 - 1.0))
            }
            KernelFamily::Tabulated { profile } => {
                let interp = Pchip::new(profile);
                interp.derivative(r)
            }
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        self.radial_value(norm(x))
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let r = norm(x);
        if r == 0.0 {
            // phi'(0) = 0 for every even radial profile.
            return Ok(vec![0.0; self.dimension]);
        }
        let dphi = self.radial_derivative(r)?;
        Ok(x.iter().map(|&xi| dphi * xi / r).collect())
    }

    pub fn hessian(&self, x: &[f64]) -> Result<Array2<f64>> {
        self.check_point(x)?;
        let d = self.dimension;
        match &self.family {
            KernelFamily::BargmannFock { length_scale } => {
                let s2 = length_scale * length_scale;
                let v = self.value(x)?;
                let mut h = Array2::zeros((d, d));
                for i in 0..d {
                    for j in 0..d {
                        let outer = x[i] * x[j] / (s2 * s2);
                        let diag = if i == j { 1.0 / s2 } else { 0.0 };
                        h[[i, j]] = v * (outer - diag);
                    }
                }
                Ok(h)
            }
            KernelFamily::Cauchy { alpha } => {
                let u = x.iter().map(|v| v * v).sum::<f64>();
                let p1 = (1.0 + u).powf(-alpha / 2.0 - 1.0);
                let p2 = (1.0 + u).powf(-alpha / 2.0 - 2.0);
                let mut h = Array2::zeros((d, d));
                for i in 0..d {
                    for j in 0..d {
                        let diag = if i == j { -alpha * p1 } else { 0.0 };
                        h[[i, j]] = diag + alpha * (alpha + 2.0) * x[i] * x[j] * p2;
                    }
                }
                Ok(h)
            }
            KernelFamily::Tabulated { .. } => Err(Error::UnsupportedOrder {
                requested: "hessian",
            }),
        }
    }

    /// `(g'(0), g''(0))` for the squared-radius profile `g(u)` with
    /// `kernel(x) = g(|x|^2)`. These generate every derivative of the kernel
    /// at the origin: second derivatives are `2 g'(0) I`, fourth derivatives
    /// are `4 g''(0) (delta_ij delta_kl + delta_ik delta_jl + delta_il delta_jk)`.
    pub fn squared_radius_curvatures(&self) -> Result<(f64, f64)> {
        match &self.family {
            KernelFamily::BargmannFock { length_scale } => {
                let s2 = length_scale * length_scale;
                Ok((-0.5 / s2, 0.25 / (s2 * s2)))
            }
            KernelFamily::Cauchy { alpha } => {
                Ok((-alpha / 2.0, (alpha / 2.0) * (alpha / 2.0 + 1.0)))
            }
            KernelFamily::Tabulated { .. } => Err(Error::UnsupportedOrder {
                requested: "curvatures at 0",
            }),
        }
    }

    /// Spectral density `rho(w) = integral of kernel(x) exp(-i<x, w>) dx`,
    /// a function of `|w|` for these isotropic kernels.
    pub fn spectral_density(&self, omega: &[f64]) -> Result<f64> {
        self.check_point(omega)?;
        self.spectral_density_radial(norm(omega))
    }

    /// True when the density has a closed form (no quadrature involved).
    pub fn has_closed_form_density(&self) -> bool {
        matches!(self.family, KernelFamily::BargmannFock { .. })
    }

    pub fn spectral_density_radial(&self, w: f64) -> Result<f64> {
        match &self.family {
            KernelFamily::BargmannFock { length_scale } => {
                let s = *length_scale;
                let d = self.dimension as f64;
                Ok((2.0 * PI).powf(d / 2.0) * s.powf(d) * (-0.5 * s * s * w * w).exp())
            }
            _ => {
                let rmax = self.quadrature_radius();
                let phi = |r: f64| self.radial_value(r).unwrap_or(0.0);
                Ok(radial_fourier(&phi, self.dimension, rmax, w))
            }
        }
    }

    /// Truncation radius for the numerical radial transform. Chosen so the
    /// neglected tail contributes below ~1e-5 in absolute value for the
    /// supported families; tabulated profiles are integrated over their
    /// full sampled range.
    pub(crate) fn quadrature_radius(&self) -> f64 {
        match &self.family {
            KernelFamily::BargmannFock { length_scale } => 12.0 * length_scale,
            KernelFamily::Cauchy { alpha } => {
                let gap = alpha - self.dimension as f64;
                let r = (1e-6 * gap).powf(-1.0 / gap);
                r.clamp(50.0, 2e4)
            }
            KernelFamily::Tabulated { profile } => profile.last().unwrap().0,
        }
    }

    /// Numerically invert the spectral density back to physical space at
    /// radius `r`; used to validate the transform convention. Kernels
    /// without a closed-form density go through a [`SpectralTable`] so the
    /// quadratures do not nest.
    pub fn inverse_spectral_probe(&self, r: f64, omega_max: f64) -> Result<f64> {
        if self.has_closed_form_density() {
            let rho = |w: f64| self.spectral_density_radial(w).unwrap_or(0.0);
            Ok(inverse_radial_probe(&rho, self.dimension, omega_max, r))
        } else {
            let table = SpectralTable::build(self, omega_max, 4000)?;
            Ok(inverse_radial_probe(
                &|w| table.density(w),
                self.dimension,
                omega_max,
                r,
            ))
        }
    }

    /// Numerical audit of the standing assumptions: positivity of the
    /// kernel, integrability of kernel and gradient, smoothness order, and
    /// non-degeneracy of `Cov(f(0), grad f(0)) = diag(kernel(0), -hess(0))`.
    pub fn audit_assumptions(
        &self,
        probe_radius: f64,
        quadrature_resolution: f64,
    ) -> Result<AssumptionReport> {
        if !(probe_radius > 0.0 && probe_radius.is_finite()) {
            return Err(Error::InvalidKernel(format!(
                "probe_radius must be positive, got {probe_radius}"
            )));
        }
        if !(quadrature_resolution > 0.0 && quadrature_resolution.is_finite()) {
            return Err(Error::InvalidKernel(format!(
                "quadrature_resolution must be positive, got {quadrature_resolution}"
            )));
        }
        let rmax = probe_radius.min(self.max_radius());
        let n_probes = ((rmax / quadrature_resolution).ceil() as usize).clamp(16, 1_000_000);

        let mut worst: Option<(f64, f64)> = None;
        for j in 0..=n_probes {
            let r = rmax * j as f64 / n_probes as f64;
            let v = self.radial_value(r)?;
            if v < 0.0 && worst.map_or(true, |(_, wv)| v < wv) {
                worst = Some((r, v));
            }
        }

        let d = self.dimension;
        let sphere = surface_area(d);
        let integrand = |r: f64| {
            let v = self.radial_value(r).unwrap_or(0.0);
            let g = self.radial_derivative(r).unwrap_or(0.0);
            sphere * r.powi(d as i32 - 1) * (v + g.abs())
        };
        let n = (n_probes + n_probes % 2).max(16);
        let integrability = simpson(&integrand, 0.0, rmax, n);

        // phi''(0) via exact curvatures when available, else a symmetric
        // second difference of the profile (phi'(0) = 0 by radial symmetry).
        let second = match self.squared_radius_curvatures() {
            Ok((g1, _)) => 2.0 * g1,
            Err(_) => {
                let h = quadrature_resolution.min(self.max_radius() / 8.0);
                2.0 * (self.radial_value(h)? - self.radial_value(0.0)?) / (h * h)
            }
        };
        let kappa0 = self.radial_value(0.0)?;
        let min_eigenvalue = kappa0.min(-second);

        let smoothness_order = match &self.family {
            KernelFamily::Tabulated { .. } => None,
            _ => Some(8),
        };

        Ok(AssumptionReport {
            positivity_ok: worst.is_none(),
            worst_violation: worst,
            integrability_estimate: integrability,
            smoothness_order,
            nondegeneracy_ok: min_eigenvalue > 1e-8,
            min_eigenvalue,
        })
    }

    /// Half-height radius: `c0 = kernel(0)/2` and the largest `r0` such that
    /// the profile stays at or above `c0` on `[0, r0]`, located by a grid
    /// scan plus bisection. `monotone` records whether the profile was
    /// non-increasing up to the crossing; when false, `r0` is the
    /// conservative first-crossing estimate.
    pub fn excursion_radius(&self) -> Result<ExcursionRadius> {
        let kappa0 = self.radial_value(0.0)?;
        let c0 = kappa0 / 2.0;

        // Bracket the first radius where the profile drops below c0.
        let mut hi = 1e-3f64;
        let cap = self.max_radius().min(1e9);
        while self.radial_value(hi.min(cap))? >= c0 {
            if hi >= cap {
                return Ok(ExcursionRadius {
                    r0: cap,
                    c0,
                    monotone: self.profile_nonincreasing(cap)?,
                });
            }
            hi = (hi * 2.0).min(cap);
        }

        const SCAN: usize = 1 << 12;
        let mut lo = 0.0;
        let mut first_below = hi;
        let mut monotone = true;
        let mut prev = kappa0;
        for j in 1..=SCAN {
            let r = hi * j as f64 / SCAN as f64;
            let v = self.radial_value(r)?;
            if v > prev + 1e-12 {
                monotone = false;
            }
            if v < c0 {
                lo = hi * (j - 1) as f64 / SCAN as f64;
                first_below = r;
                break;
            }
            prev = v;
        }
        let (mut a, mut b) = (lo, first_below);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if self.radial_value(mid)? >= c0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(ExcursionRadius { r0: a, c0, monotone })
    }

    fn profile_nonincreasing(&self, up_to: f64) -> Result<bool> {
        let mut prev = self.radial_value(0.0)?;
        for j in 1..=1024 {
            let r = up_to * j as f64 / 1024.0;
            let v = self.radial_value(r)?;
            if v > prev + 1e-12 {
                return Ok(false);
            }
            prev = v;
        }
        Ok(true)
    }
}

/// Outcome of [`KernelSpec::audit_assumptions`]. Violations are reported
/// here, never thrown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub positivity_ok: bool,
    /// Most negative probed `(radius, value)` when positivity fails.
    pub worst_violation: Option<(f64, f64)>,
    /// Truncated integral of `kernel + |grad kernel|` over the probe ball.
    pub integrability_estimate: f64,
    /// Differentiability order; `None` means unknown (tabulated profiles).
    pub smoothness_order: Option<u32>,
    pub nondegeneracy_ok: bool,
    /// Smallest eigenvalue of `Cov(f(0), grad f(0))`.
    pub min_eigenvalue: f64,
}

/// Half-height radius of a kernel; see [`KernelSpec::excursion_radius`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcursionRadius {
    pub r0: f64,
    pub c0: f64,
    pub monotone: bool,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Surface area of the unit sphere in `d` dimensions (d = 1, 2, 3).
pub(crate) fn surface_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => unreachable!("dimension checked at construction"),
    }
}

/// Composite Simpson rule with `n` (even) panels.
pub(crate) fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for j in 1..n {
        let w = if j % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * j as f64);
    }
    acc * h / 3.0
}

/// Radial Fourier transform of an isotropic function in `d` dimensions:
/// `integral of phi(|x|) exp(-i<x, w>) dx` as a function of `w = |omega|`,
/// truncated at `rmax`. The same formula inverts the transform up to a
/// `(2 pi)^-d` factor.
pub(crate) fn radial_fourier(phi: &dyn Fn(f64) -> f64, d: usize, rmax: f64, w: f64) -> f64 {
    // Resolve both the profile and the oscillation: at least 32 panels per
    // oscillation period plus an 8192-panel floor.
    let periods = w.abs() * rmax / (2.0 * PI);
    let n = ((periods * 32.0) as usize).max(1 << 13);
    match d {
        1 => 2.0 * simpson(&|r| phi(r) * (w * r).cos(), 0.0, rmax, n),
        2 => 2.0 * PI * simpson(&|r| phi(r) * bessel_j0(w * r) * r, 0.0, rmax, n),
        3 => {
            if w.abs() < 1e-9 {
                4.0 * PI * simpson(&|r| phi(r) * r * r, 0.0, rmax, n)
            } else {
                4.0 * PI / w * simpson(&|r| phi(r) * (w * r).sin() * r, 0.0, rmax, n)
            }
        }
        _ => unreachable!("dimension checked at construction"),
    }
}

/// Bessel J0: power series below 10, two-term-corrected asymptotic beyond
/// (absolute error below 5e-7, sufficient for the 1e-4 transform tolerance
/// documented above).
pub(crate) fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 10.0 {
        // J0(x) = sum_k (-1)^k (x^2/4)^k / (k!)^2; terms stay below ~1e2
        // here, so cancellation costs at most ~1e-14.
        let u = 0.25 * ax * ax;
        let mut term = 1.0;
        let mut acc = 1.0;
        for k in 1..40 {
            term *= -u / ((k * k) as f64);
            acc += term;
            if term.abs() < 1e-17 {
                break;
            }
        }
        acc
    } else {
        let chi = ax - PI / 4.0;
        let ix2 = 1.0 / (ax * ax);
        let p = 1.0 + ix2 * (-0.070_312_5 + ix2 * 0.112_152_099_609_375);
        let q = (1.0 / ax) * (-0.125 + ix2 * 0.073_242_187_5);
        (2.0 / (PI * ax)).sqrt() * (p * chi.cos() - q * chi.sin())
    }
}

/// Dense radial table of a spectral density on `[0, wmax]`, linearly
/// interpolated. Avoids re-running the radial quadrature per frequency when
/// a kernel has no closed-form density; beyond `wmax` the density is
/// treated as 0 (documented truncation).
#[derive(Debug, Clone)]
pub struct SpectralTable {
    wmax: f64,
    values: Vec<f64>,
}

impl SpectralTable {
    pub fn build(kernel: &KernelSpec, wmax: f64, points: usize) -> Result<Self> {
        if !(wmax > 0.0 && wmax.is_finite()) || points < 2 {
            return Err(Error::InvalidKernel(format!(
                "spectral table needs wmax > 0 and >= 2 points, got ({wmax}, {points})"
            )));
        }
        let values = (0..points)
            .map(|j| kernel.spectral_density_radial(wmax * j as f64 / (points - 1) as f64))
            .collect::<Result<Vec<_>>>()?;
        Ok(SpectralTable { wmax, values })
    }

    pub fn density(&self, w: f64) -> f64 {
        let w = w.abs();
        if w >= self.wmax {
            return 0.0;
        }
        let t = w / self.wmax * (self.values.len() - 1) as f64;
        let i = t as usize;
        let frac = t - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    pub fn wmax(&self) -> f64 {
        self.wmax
    }
}

/// Numerically invert an isotropic spectral density at physical radius `r`.
pub fn inverse_radial_probe(density: &dyn Fn(f64) -> f64, d: usize, omega_max: f64, r: f64) -> f64 {
    radial_fourier(density, d, omega_max, r) / (2.0 * PI).powi(d as i32)
}

/// Monotone cubic (PCHIP) interpolation of a radial profile. The derivative
/// at radius 0 is pinned to 0, as radial symmetry requires.
struct Pchip<'a> {
    pts: &'a [(f64, f64)],
    derivs: Vec<f64>,
}

impl<'a> Pchip<'a> {
    fn new(pts: &'a [(f64, f64)]) -> Self {
        let n = pts.len();
        let mut derivs = vec![0.0; n];
        if n == 2 {
            let s = (pts[1].1 - pts[0].1) / (pts[1].0 - pts[0].0);
            derivs[0] = 0.0;
            derivs[1] = s;
            return Pchip { pts, derivs };
        }
        let h: Vec<f64> = pts.windows(2).map(|w| w[1].0 - w[0].0).collect();
        let s: Vec<f64> = pts
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .collect();
        for i in 1..n - 1 {
            if s[i - 1] * s[i] <= 0.0 {
                derivs[i] = 0.0;
            } else {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                derivs[i] = (w1 + w2) / (w1 / s[i - 1] + w2 / s[i]);
            }
        }
        derivs[0] = 0.0;
        // One-sided three-point end slope, clamped to preserve monotonicity.
        let m = n - 1;
        let end = ((2.0 * h[m - 1] + h[m - 2]) * s[m - 1] - h[m - 1] * s[m - 2])
            / (h[m - 1] + h[m - 2]);
        derivs[m] = if end * s[m - 1] <= 0.0 {
            0.0
        } else if s[m - 1] * s[m - 2] <= 0.0 && end.abs() > 3.0 * s[m - 1].abs() {
            3.0 * s[m - 1]
        } else {
            end
        };
        Pchip { pts, derivs }
    }

    fn locate(&self, r: f64) -> Result<usize> {
        let rmax = self.pts.last().unwrap().0;
        if !(0.0..=rmax).contains(&r) {
            return Err(Error::RadiusOutOfRange {
                radius: r,
                max_radius: rmax,
            });
        }
        let i = self.pts.partition_point(|p| p.0 <= r);
        Ok(i.clamp(1, self.pts.len() - 1) - 1)
    }

    fn value(&self, r: f64) -> Result<f64> {
        let i = self.locate(r)?;
        let (x0, y0) = self.pts[i];
        let (x1, y1) = self.pts[i + 1];
        let h = x1 - x0;
        let t = (r - x0) / h;
        let (d0, d1) = (self.derivs[i], self.derivs[i + 1]);
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        Ok(h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1)
    }

    fn derivative(&self, r: f64) -> Result<f64> {
        let i = self.locate(r)?;
        let (x0, y0) = self.pts[i];
        let (x1, y1) = self.pts[i + 1];
        let h = x1 - x0;
        let t = (r - x0) / h;
        let (d0, d1) = (self.derivs[i], self.derivs[i + 1]);
        let dh00 = 6.0 * t * t - 6.0 * t;
        let dh10 = 3.0 * t * t - 4.0 * t + 1.0;
        let dh01 = -6.0 * t * t + 6.0 * t;
        let dh11 = 3.0 * t * t - 2.0 * t;
        Ok((dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn bf(d: usize) -> KernelSpec {
        KernelSpec::bargmann_fock(1.0, d).unwrap()
    }

    #[test]
    fn bargmann_fock_values() {
        let k = bf(2);
        assert_eq!(k.value(&[0.0, 0.0]).unwrap(), 1.0);
        // |x|^2 = 2 ln 2 gives exp(-ln 2) = 1/2.
        let r = (2.0 * f64::ln(2.0)).sqrt();
        assert_relative_eq!(k.value(&[r, 0.0]).unwrap(), 0.5, max_relative = 1e-14);
        assert_relative_eq!(
            k.value(&[1.0, 0.0]).unwrap(),
            f64::exp(-0.5),
            max_relative = 1e-14
        );
    }

    #[test]
    fn cauchy_values() {
        let k = KernelSpec::cauchy(4.0, 2).unwrap();
        assert_relative_eq!(k.value(&[1.0, 0.0]).unwrap(), 0.25, max_relative = 1e-14);
        assert_eq!(k.value(&[0.0, 0.0]).unwrap(), 1.0);
        assert!(KernelSpec::cauchy(2.0, 2).is_err(), "alpha must exceed d");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let kernels = [bf(3), KernelSpec::cauchy(4.5, 3).unwrap()];
        let probes = [
            [0.3, -0.7, 1.1],
            [1.0, 0.0, 0.0],
            [-0.2, 0.4, -0.9],
            [2.0, 1.0, -1.0],
        ];
        for k in &kernels {
            for x in &probes {
                let g = k.gradient(x).unwrap();
                for i in 0..3 {
                    let h = 1e-5;
                    let mut xp = *x;
                    let mut xm = *x;
                    xp[i] += h;
                    xm[i] -= h;
                    let fd = (k.value(&xp).unwrap() - k.value(&xm).unwrap()) / (2.0 * h);
                    assert_relative_eq!(g[i], fd, max_relative = 1e-6, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn gradient_is_odd_hessian_matches_fd() {
        let k = KernelSpec::cauchy(4.0, 2).unwrap();
        let x = [0.7, -0.4];
        let neg = [-0.7, 0.4];
        let g = k.gradient(&x).unwrap();
        let gn = k.gradient(&neg).unwrap();
        for i in 0..2 {
            assert_relative_eq!(g[i], -gn[i], max_relative = 1e-14);
        }
        let h = k.hessian(&x).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let e = 1e-4;
                let mut xp = x;
                let mut xm = x;
                xp[j] += e;
                xm[j] -= e;
                let fd = (k.gradient(&xp).unwrap()[i] - k.gradient(&xm).unwrap()[i]) / (2.0 * e);
                assert_relative_eq!(h[[i, j]], fd, max_relative = 1e-5, epsilon = 1e-8);
                assert_relative_eq!(h[[i, j]], h[[j, i]], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn hessian_at_zero_matches_curvatures() {
        for k in [bf(2), KernelSpec::cauchy(4.0, 2).unwrap()] {
            let (g1, _) = k.squared_radius_curvatures().unwrap();
            let h = k.hessian(&[0.0, 0.0]).unwrap();
            assert_relative_eq!(h[[0, 0]], 2.0 * g1, max_relative = 1e-12);
            assert_relative_eq!(h[[1, 1]], 2.0 * g1, max_relative = 1e-12);
            assert_eq!(h[[0, 1]], 0.0);
        }
    }

    #[test]
    fn spectral_density_closed_forms() {
        let k2 = bf(2);
        assert_relative_eq!(
            k2.spectral_density(&[0.0, 0.0]).unwrap(),
            2.0 * PI,
            max_relative = 1e-12
        );
        let k1 = bf(1);
        assert_relative_eq!(
            k1.spectral_density(&[1.0]).unwrap(),
            (2.0 * PI).sqrt() * f64::exp(-0.5),
            max_relative = 1e-12
        );
    }

    #[test]
    fn cauchy_density_matches_direct_2d_quadrature() {
        // Closed form at omega = 0: integral of (1 + r^2)^-2 over the plane
        // equals pi. The direct 2-d Simpson grid is an independent oracle.
        let k = KernelSpec::cauchy(4.0, 2).unwrap();
        let rho0 = k.spectral_density(&[0.0, 0.0]).unwrap();
        assert_relative_eq!(rho0, PI, max_relative = 1e-3);

        let half = 60.0;
        let n = 600;
        let inner = |x: f64| {
            simpson(
                &|y: f64| (1.0 + x * x + y * y).powi(-2),
                -half,
                half,
                n,
            )
        };
        let direct = simpson(&inner, -half, half, n);
        assert_relative_eq!(rho0, direct, max_relative = 1e-2);
    }

    #[test]
    fn spectral_density_nonnegative_probes() {
        for k in [bf(2), KernelSpec::cauchy(4.0, 2).unwrap()] {
            for j in 0..40 {
                let w = j as f64 * 0.5;
                let rho = k.spectral_density_radial(w).unwrap();
                assert!(rho >= -1e-6, "rho({w}) = {rho} for {}", k.id());
            }
        }
    }

    #[test]
    fn spectral_roundtrip_recovers_kernel() {
        let k = bf(2);
        for j in 0..20 {
            let r = 0.15 * j as f64;
            let back = k.inverse_spectral_probe(r, 12.0).unwrap();
            let direct = k.radial_value(r).unwrap();
            assert!(
                (back - direct).abs() < 1e-4,
                "bf: r = {r}, roundtrip {back} vs {direct}"
            );
        }

        let k = KernelSpec::cauchy(4.0, 2).unwrap();
        let table = SpectralTable::build(&k, 40.0, 4000).unwrap();
        for j in 0..20 {
            let r = 0.15 * j as f64;
            let back = inverse_radial_probe(&|w| table.density(w), 2, 40.0, r);
            let direct = k.radial_value(r).unwrap();
            assert!(
                (back - direct).abs() < 1e-4,
                "cauchy: r = {r}, roundtrip {back} vs {direct}"
            );
        }
    }

    #[test]
    fn excursion_radius_bargmann_fock() {
        let er = bf(2).excursion_radius().unwrap();
        assert_eq!(er.c0, 0.5);
        assert!(er.monotone);
        // Solve exp(-r^2/2) = 1/2: r0 = sqrt(2 ln 2).
        assert_relative_eq!(er.r0, 1.177_410_022_515_474_7, max_relative = 1e-9);
    }

    #[test]
    fn excursion_radius_cauchy() {
        let er = KernelSpec::cauchy(4.0, 2).unwrap().excursion_radius().unwrap();
        // (1 + r^2)^-2 = 1/2 at r^2 = sqrt(2) - 1.
        assert_relative_eq!(er.r0, f64::sqrt(f64::sqrt(2.0) - 1.0), max_relative = 1e-9);
        assert_eq!(er.c0, 0.5);
        assert!(er.monotone);
    }

    #[test]
    fn excursion_radius_scales_homogeneously() {
        let base: Vec<(f64, f64)> = (0..200)
            .map(|j| {
                let r = j as f64 * 0.02;
                (r, f64::exp(-0.5 * r * r))
            })
            .collect();
        let scaled: Vec<(f64, f64)> = base.iter().map(|&(r, v)| (r, 3.0 * v)).collect();
        let e1 = KernelSpec::tabulated(base, 2).unwrap().excursion_radius().unwrap();
        let e2 = KernelSpec::tabulated(scaled, 2).unwrap().excursion_radius().unwrap();
        assert_relative_eq!(e1.r0, e2.r0, max_relative = 1e-9);
        assert_relative_eq!(3.0 * e1.c0, e2.c0, max_relative = 1e-12);
    }

    #[test]
    fn excursion_radius_postcondition_on_probes() {
        let k = bf(2);
        let er = k.excursion_radius().unwrap();
        let mut state = 0x2545_f491_4f6c_dd1du64;
        for _ in 0..10_000 {
            state = state.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1);
            let u = (state >> 11) as f64 / (1u64 << 53) as f64;
            let r = u * er.r0;
            assert!(k.radial_value(r).unwrap() >= er.c0 - 1e-12);
        }
    }

    #[test]
    fn audit_bargmann_fock_passes() {
        let rep = bf(2).audit_assumptions(10.0, 0.01).unwrap();
        assert!(rep.positivity_ok);
        assert!(rep.nondegeneracy_ok);
        assert_eq!(rep.smoothness_order, Some(8));
        assert!(rep.worst_violation.is_none());
        // kernel(0) = 1 and -phi''(0) = 1: both eigenvalue blocks are 1.
        assert_relative_eq!(rep.min_eigenvalue, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn audit_integrability_monotone_in_radius() {
        let k = KernelSpec::cauchy(3.0, 2).unwrap();
        let mut prev = 0.0;
        for radius in [2.0, 4.0, 8.0, 16.0, 32.0] {
            let rep = k.audit_assumptions(radius, 0.01).unwrap();
            assert!(rep.integrability_estimate >= prev - 1e-9);
            assert!(rep.integrability_estimate >= 0.0);
            prev = rep.integrability_estimate;
        }
        // alpha = d + 1: the integral converges, so doubling the radius far
        // out moves the estimate by little.
        let a = k.audit_assumptions(64.0, 0.05).unwrap().integrability_estimate;
        let b = k.audit_assumptions(128.0, 0.05).unwrap().integrability_estimate;
        assert!((b - a) / b < 0.2, "tail still large: {a} -> {b}");
    }

    #[test]
    fn audit_flags_negative_tabulated_sample() {
        let profile = vec![(0.0, 1.0), (1.0, 0.5), (2.0, -0.1), (3.0, 0.0)];
        let k = KernelSpec::tabulated(profile, 2).unwrap();
        let rep = k.audit_assumptions(3.0, 0.01).unwrap();
        assert!(!rep.positivity_ok);
        let (r, v) = rep.worst_violation.unwrap();
        assert!(v < 0.0);
        assert!((1.0..=3.0).contains(&r), "violating radius {r}");
        assert_eq!(rep.smoothness_order, None);
    }

    #[test]
    fn tabulated_interpolates_and_errors() {
        let profile: Vec<(f64, f64)> = (0..=100)
            .map(|j| {
                let r = j as f64 * 0.1;
                (r, f64::exp(-0.5 * r * r))
            })
            .collect();
        let k = KernelSpec::tabulated(profile, 2).unwrap();
        for j in 0..50 {
            let r = 0.13 * j as f64;
            let exact = f64::exp(-0.5 * r * r);
            assert!(
                (k.radial_value(r).unwrap() - exact).abs() < 5e-4,
                "r = {r}"
            );
        }
        assert!(matches!(
            k.value(&[11.0, 0.0]),
            Err(Error::RadiusOutOfRange { .. })
        ));
        assert!(matches!(
            k.hessian(&[0.5, 0.5]),
            Err(Error::UnsupportedOrder { .. })
        ));
        // Gradient via the interpolant derivative.
        let g = k.gradient(&[1.0, 0.0]).unwrap();
        assert!((g[0] - (-f64::exp(-0.5))).abs() < 5e-3);
        assert_eq!(k.gradient(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn pchip_preserves_monotone_data() {
        let profile = vec![(0.0, 1.0), (0.5, 0.9), (1.0, 0.5), (2.0, 0.2), (4.0, 0.0)];
        let k = KernelSpec::tabulated(profile, 1).unwrap();
        let mut prev = k.radial_value(0.0).unwrap();
        for j in 1..=400 {
            let v = k.radial_value(4.0 * j as f64 / 400.0).unwrap();
            assert!(v <= prev + 1e-12, "non-monotone at step {j}");
            prev = v;
        }
    }

    #[test]
    fn json_shape_roundtrip() {
        let k = bf(2);
        let js = serde_json::to_value(&k).unwrap();
        assert_eq!(js["family"], "bargmann_fock");
        assert_eq!(js["params"]["length_scale"], 1.0);
        assert_eq!(js["dimension"], 2);
        let back: KernelSpec = serde_json::from_value(js).unwrap();
        assert_eq!(back, k);

        let bad = serde_json::json!({
            "family": "cauchy", "params": {"alpha": 1.5}, "dimension": 2
        });
        assert!(serde_json::from_value::<KernelSpec>(bad).is_err());
    }

    #[test]
    fn bessel_j0_reference_values() {
        // Reference values from standard tables.
        assert!((bessel_j0(0.0) - 1.0).abs() < 1e-12);
        assert!((bessel_j0(1.0) - 0.765_197_686_5).abs() < 1e-9);
        assert!((bessel_j0(2.404_825_557_7)).abs() < 1e-9, "first zero");
        assert!((bessel_j0(10.0) + 0.245_935_764_5).abs() < 5e-7);
        assert!((bessel_j0(20.0) - 0.167_024_664_3).abs() < 5e-7);
        assert!((bessel_j0(50.0) - 0.055_812_327_7).abs() < 5e-7);
    }
}
