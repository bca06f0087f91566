//! Deterministic additive shifts: a nonnegative bump field `h`, built as a
//! kernel sum over a lattice of centers, that raises a sample above a target
//! level on a ball while keeping finite total mass. The floor `M` is chosen
//! from Monte Carlo quantiles of how far samples dip below zero on the ball.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::kernels::{simpson, surface_area, KernelSpec};
use crate::rng::derive_seed;
use crate::synthesis::{CirculantEmbedding, FieldSample};

/// Floor recommendation from [`choose_floor_m`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorChoice {
    /// Chosen floor: the empirical quantile, clamped nonnegative and rounded
    /// up to the next multiple of 0.1.
    pub m: f64,
    /// Raw empirical `target_prob`-quantile of `-inf_ball f`.
    pub quantile: f64,
    /// Order-statistic 95% confidence band around the quantile.
    pub band: (f64, f64),
    pub n_samples: usize,
    pub target_prob: f64,
}

/// Pick the floor `M` so that, with probability at least `target_prob`, a
/// sample satisfies `f >= -M` everywhere on the discrete ball of the given
/// radius. `M` is the `target_prob`-quantile of `-inf_ball f`, estimated
/// from `n_samples` synthesized fields, clamped at zero and rounded up to a
/// multiple of 0.1.
pub fn choose_floor_m(
    kernel: &KernelSpec,
    grid: &GridSpec,
    radius: f64,
    target_prob: f64,
    n_samples: usize,
    base_seed: u64,
) -> Result<FloorChoice> {
    if !(target_prob > 0.0 && target_prob < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "target probability {target_prob} must lie strictly between 0 and 1"
        )));
    }
    const MIN_SAMPLES: usize = 50;
    if n_samples < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            min: MIN_SAMPLES,
            got: n_samples,
        });
    }
    let origin = vec![0.0; grid.dim()];
    if grid.reach() < radius {
        return Err(Error::InvalidGrid(format!(
            "grid reach {} does not contain the ball of radius {radius}",
            grid.reach()
        )));
    }
    let ball = grid.ball_vertices(&origin, radius);
    if ball.is_empty() {
        return Err(Error::InvalidGrid(format!(
            "ball of radius {radius} contains no grid vertices"
        )));
    }

    let plan = CirculantEmbedding::plan(kernel, grid)?;
    let mut deficits: Vec<f64> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let sample = plan.sample(derive_seed(base_seed, i));
            let flat = sample.values_flat();
            let inf = ball
                .iter()
                .map(|&lin| flat[lin])
                .fold(f64::INFINITY, f64::min);
            -inf
        })
        .collect();
    deficits.sort_by(f64::total_cmp);

    let n = n_samples as f64;
    let rank = (target_prob * n).ceil() as usize;
    let quantile = deficits[rank.clamp(1, n_samples) - 1];

    // Nonparametric band from order statistics (normal approximation to the
    // binomial counts, z = 1.96).
    let half_width = 1.96 * (n * target_prob * (1.0 - target_prob)).sqrt();
    let lo_rank = ((target_prob * n - half_width).floor() as isize).clamp(1, n_samples as isize);
    let hi_rank = ((target_prob * n + half_width).ceil() as isize).clamp(1, n_samples as isize);
    let band = (
        deficits[lo_rank as usize - 1],
        deficits[hi_rank as usize - 1],
    );

    let m = ((quantile * 10.0).ceil() / 10.0).max(0.0);
    Ok(FloorChoice {
        m,
        quantile,
        band,
        n_samples,
        target_prob,
    })
}

/// Shift construction: kernel bumps of common amplitude `(M + level) / c0`
/// placed on the lattice `r0 Z^d` intersected with the closed ball of radius
/// `radius + r0`, where `(r0, c0)` come from the kernel's half-height
/// crossing. Any point of the target ball is then within `r0` of a center,
/// so the nearest bump alone already contributes `M + level`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpec {
    kernel: KernelSpec,
    level: f64,
    radius: f64,
    floor_m: f64,
    r0: f64,
    c0: f64,
    amplitude: f64,
    centers: Vec<Vec<f64>>,
}

pub fn build_shift(
    kernel: &KernelSpec,
    level: f64,
    radius: f64,
    floor_m: f64,
) -> Result<ShiftSpec> {
    if !radius.is_finite() || radius <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "shift radius {radius} must be positive and finite"
        )));
    }
    if !level.is_finite() || !floor_m.is_finite() || floor_m < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "level {level} must be finite and floor {floor_m} finite and nonnegative"
        )));
    }
    let m_plus_level = floor_m + level;
    if m_plus_level < 0.0 {
        return Err(Error::NegativeAmplitude { m_plus_level });
    }
    let ex = kernel.excursion_radius()?;
    let amplitude = m_plus_level / ex.c0;
    let centers = lattice_in_ball(kernel.dimension(), ex.r0, radius + ex.r0);
    Ok(ShiftSpec {
        kernel: kernel.clone(),
        level,
        radius,
        floor_m,
        r0: ex.r0,
        c0: ex.c0,
        amplitude,
        centers,
    })
}

/// Points of `step * Z^d` with `|z| <= rad`, in lexicographic order.
fn lattice_in_ball(d: usize, step: f64, rad: f64) -> Vec<Vec<f64>> {
    let kmax = (rad / step).floor() as isize;
    let bound = (rad / step) * (rad / step) * (1.0 + 1e-12);
    let mut out = Vec::new();
    let mut k = vec![-kmax; d];
    loop {
        let norm2: f64 = k.iter().map(|&v| (v * v) as f64).sum();
        if norm2 <= bound {
            out.push(k.iter().map(|&v| v as f64 * step).collect());
        }
        let mut ax = d;
        loop {
            if ax == 0 {
                return out;
            }
            ax -= 1;
            if k[ax] < kmax {
                k[ax] += 1;
                for r in ax + 1..d {
                    k[r] = -kmax;
                }
                break;
            }
        }
    }
}

/// Radial kernel value with the profile extended by zero beyond its sampled
/// range, so sums over distant centers stay well defined for tabulated
/// kernels.
fn value_extended(kernel: &KernelSpec, r: f64) -> Result<f64> {
    match kernel.radial_value(r) {
        Ok(v) => Ok(v),
        Err(Error::RadiusOutOfRange { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

fn derivative_extended(kernel: &KernelSpec, r: f64) -> Result<f64> {
    match kernel.radial_derivative(r) {
        Ok(v) => Ok(v),
        Err(Error::RadiusOutOfRange { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

impl ShiftSpec {
    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn floor_m(&self) -> f64 {
        self.floor_m
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    /// Guaranteed value of `h` on the target ball.
    pub fn guaranteed_floor(&self) -> f64 {
        self.floor_m + self.level
    }

    pub fn id(&self) -> String {
        format!(
            "cm:R={}:M={}:l={}:{}",
            self.radius,
            self.floor_m,
            self.level,
            self.kernel.id()
        )
    }

    fn sum_at(&self, x: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for z in &self.centers {
            let r2: f64 = x
                .iter()
                .zip(z)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            acc += value_extended(&self.kernel, r2.sqrt())?;
        }
        Ok(self.amplitude * acc)
    }

    /// Pointwise value of `h`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.kernel.dimension() {
            return Err(Error::InvalidConfig(format!(
                "point has {} coordinates, shift lives in dimension {}",
                x.len(),
                self.kernel.dimension()
            )));
        }
        self.sum_at(x)
    }

    /// Pointwise gradient of `h`: radial derivatives summed over centers.
    pub fn evaluate_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.kernel.dimension();
        if x.len() != d {
            return Err(Error::InvalidConfig(format!(
                "point has {} coordinates, shift lives in dimension {d}",
                x.len()
            )));
        }
        let mut grad = vec![0.0; d];
        for z in &self.centers {
            let diff: Vec<f64> = x.iter().zip(z).map(|(a, b)| a - b).collect();
            let r = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r == 0.0 {
                continue;
            }
            let slope = derivative_extended(&self.kernel, r)?;
            for ax in 0..d {
                grad[ax] += slope * diff[ax] / r;
            }
        }
        for g in &mut grad {
            *g *= self.amplitude;
        }
        Ok(grad)
    }

    /// Evaluate `h` on every vertex of the grid and verify the two defining
    /// bounds: `h >= 0` everywhere and `h >= M + level` on the discrete
    /// ball. The worst offending vertex is reported on failure.
    pub fn field(&self, grid: &GridSpec) -> Result<ShiftField> {
        let d = self.kernel.dimension();
        if grid.dim() != d {
            return Err(Error::GridMismatch);
        }
        if grid.reach() < self.radius {
            return Err(Error::InvalidGrid(format!(
                "grid reach {} does not contain the shift ball of radius {}",
                grid.reach(),
                self.radius
            )));
        }
        let shape = grid.cells().to_vec();
        let coords: Vec<Vec<f64>> = (0..d)
            .map(|ax| (0..shape[ax]).map(|i| grid.coord(ax, i)).collect())
            .collect();
        let values: Vec<f64> = (0..grid.n_vertices())
            .into_par_iter()
            .map(|lin| {
                let mut rem = lin;
                let mut x = [0.0f64; crate::grid::MAX_DIM];
                for ax in (0..d).rev() {
                    x[ax] = coords[ax][rem % shape[ax]];
                    rem /= shape[ax];
                }
                self.sum_at(&x[..d])
            })
            .collect::<Result<Vec<f64>>>()?;

        // Nonnegativity everywhere. Kernel sums of nonnegative profiles are
        // exactly nonnegative, so no tolerance is applied.
        let (argmin, &min_overall) = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("grid has at least one vertex");
        if min_overall < 0.0 {
            return Err(Error::ShiftBoundViolation {
                vertex: unflatten(argmin, &shape),
                value: min_overall,
                required: 0.0,
            });
        }

        // Floor on the discrete ball, with a small slack for the half-height
        // crossing radius itself being a numerical root.
        let required = self.guaranteed_floor();
        let origin = vec![0.0; d];
        let ball = grid.ball_vertices(&origin, self.radius);
        let mut min_on_ball = f64::INFINITY;
        let mut worst = 0usize;
        for &lin in &ball {
            if values[lin] < min_on_ball {
                min_on_ball = values[lin];
                worst = lin;
            }
        }
        let slack = 1e-9 * (1.0 + required.abs());
        if !ball.is_empty() && min_on_ball < required - slack {
            return Err(Error::ShiftBoundViolation {
                vertex: unflatten(worst, &shape),
                value: min_on_ball,
                required,
            });
        }

        let max_overall = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(ShiftField {
            grid: grid.clone(),
            values,
            shift_id: self.id(),
            min_on_ball,
            max_overall,
        })
    }
}

/// Free-function form of [`ShiftSpec::evaluate`].
pub fn evaluate_shift(spec: &ShiftSpec, x: &[f64]) -> Result<f64> {
    spec.evaluate(x)
}

fn unflatten(mut lin: usize, shape: &[usize]) -> Vec<usize> {
    let mut idx = vec![0usize; shape.len()];
    for ax in (0..shape.len()).rev() {
        idx[ax] = lin % shape[ax];
        lin /= shape[ax];
    }
    idx
}

/// The shift evaluated on a grid, with its verified bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftField {
    grid: GridSpec,
    values: Vec<f64>,
    shift_id: String,
    min_on_ball: f64,
    max_overall: f64,
}

impl ShiftField {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values_flat(&self) -> &[f64] {
        &self.values
    }

    pub fn shift_id(&self) -> &str {
        &self.shift_id
    }

    pub fn min_on_ball(&self) -> f64 {
        self.min_on_ball
    }

    pub fn max_overall(&self) -> f64 {
        self.max_overall
    }
}

/// Add the shift to a sample. The result keeps a handle to the unshifted
/// sample so [`unshift_sample`] is bit-exact.
pub fn shift_sample(base: &FieldSample, shift: &ShiftField) -> Result<FieldSample> {
    if base.grid() != shift.grid() {
        return Err(Error::GridMismatch);
    }
    let mut values = base.values().clone();
    let flat = values
        .as_slice_mut()
        .expect("field samples are stored in standard layout");
    for (v, h) in flat.iter_mut().zip(&shift.values) {
        *v += h;
    }
    Ok(base.with_shift(values, shift.shift_id.clone()))
}

/// Recover the unshifted sample retained by [`shift_sample`]. This returns
/// the original values, not a floating-point subtraction.
pub fn unshift_sample(shifted: &FieldSample) -> Result<FieldSample> {
    shifted.shift_base().cloned().ok_or_else(|| {
        Error::InvalidConfig(
            "sample does not retain an unshifted base; only outputs of shift_sample do".into(),
        )
    })
}

/// Mass bounds for the shift: its exact integral and a triangle-inequality
/// bound on the integral of `|grad h|`, both scaling linearly in the number
/// of centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilityReport {
    /// `integral of h` = amplitude x n_centers x per-center mass (exact by
    /// translation invariance).
    pub shift_integral: f64,
    /// Upper bound for `integral of |grad h|`.
    pub gradient_integral: f64,
    /// `integral of kappa` over all of space, one center.
    pub per_center_mass: f64,
    pub n_centers: usize,
    /// True when doubling the quadrature resolution (and, where the profile
    /// allows, the truncation radius) moves both integrals by less than 1%.
    pub converged: bool,
}

pub fn shift_integrability(
    spec: &ShiftSpec,
    quadrature_resolution: usize,
) -> Result<IntegrabilityReport> {
    let n = quadrature_resolution.max(16) & !1;
    let kernel = &spec.kernel;
    let d = kernel.dimension();
    let r_base = kernel.quadrature_radius();
    let r_wide = (2.0 * r_base).min(kernel.max_radius());

    let mass = |rmax: f64, panels: usize| {
        let f = |r: f64| r.powi(d as i32 - 1) * value_extended(kernel, r).unwrap_or(0.0);
        surface_area(d) * simpson(&f, 0.0, rmax, panels)
    };
    let grad_mass = |rmax: f64, panels: usize| {
        let f =
            |r: f64| r.powi(d as i32 - 1) * derivative_extended(kernel, r).unwrap_or(0.0).abs();
        surface_area(d) * simpson(&f, 0.0, rmax, panels)
    };

    let per_center_mass = mass(r_base, n);
    let per_center_grad = grad_mass(r_base, n);
    let mass_refined = mass(r_wide, 2 * n);
    let grad_refined = grad_mass(r_wide, 2 * n);

    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
    let converged =
        rel(per_center_mass, mass_refined) < 0.01 && rel(per_center_grad, grad_refined) < 0.01;

    let k = spec.centers.len();
    Ok(IntegrabilityReport {
        shift_integral: spec.amplitude * k as f64 * per_center_mass,
        gradient_integral: spec.amplitude * k as f64 * per_center_grad,
        per_center_mass,
        n_centers: k,
        converged,
    })
}
