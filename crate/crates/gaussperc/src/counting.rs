//! Critical-point counting: discrete sign-change cells, the box-boundary
//! shell with its component/weak-maximum bound, and the Kac-Rice density of
//! critical points evaluated by conditional Monte Carlo.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::connectivity::ExcursionMask;
use crate::error::{Error, Result};
use crate::grid::{strides_of, GridSpec};
use crate::kernels::KernelSpec;
use crate::synthesis::FieldSample;

/// Cells of the grid on which every axis-aligned central-difference
/// derivative changes sign among the cell's corners (attains a positive and
/// a nonpositive value). For a smooth function this marks the cells
/// containing critical points; exact zeros at a corner count as the
/// nonpositive sign so a symmetric peak is counted once, not twice.
pub fn count_discrete_critical_points(sample: &FieldSample) -> Result<usize> {
    let grid = sample.grid();
    let d = grid.dim();
    let shape = grid.cells();
    if shape.iter().any(|&c| c < 4) {
        return Err(Error::InvalidGrid(
            "central differences on cell corners need at least 4 vertices per axis".into(),
        ));
    }
    let strides = strides_of(shape);
    let flat = sample.values_flat();
    let corners = 1usize << d;

    // Cell start vertex ranges over [1, cells-3] per axis so every corner
    // has both central-difference neighbours.
    let mut count = 0usize;
    let mut idx: Vec<usize> = vec![1; d];
    'cells: loop {
        let base: usize = idx.iter().zip(&strides).map(|(&i, &s)| i * s).sum();
        let mut all_axes_change = true;
        'axes: for ax in 0..d {
            let mut has_pos = false;
            let mut has_nonpos = false;
            for corner in 0..corners {
                let mut lin = base;
                for a in 0..d {
                    if corner >> a & 1 == 1 {
                        lin += strides[a];
                    }
                }
                let diff = flat[lin + strides[ax]] - flat[lin - strides[ax]];
                if diff > 0.0 {
                    has_pos = true;
                } else {
                    has_nonpos = true;
                }
                if has_pos && has_nonpos {
                    continue 'axes;
                }
            }
            all_axes_change = false;
            break;
        }
        if all_axes_change {
            count += 1;
        }

        let mut ax = d;
        loop {
            if ax == 0 {
                break 'cells;
            }
            ax -= 1;
            if idx[ax] < shape[ax] - 3 {
                idx[ax] += 1;
                for r in ax + 1..d {
                    idx[r] = 1;
                }
                break;
            }
        }
    }
    Ok(count)
}

/// The vertices at Chebyshev index-distance exactly `k = round(l / spacing)`
/// from the grid origin, with the adjacency induced from grid face
/// adjacency. This is the discrete boundary of the centered box `[-l, l]^d`.
pub struct BoundaryShell {
    k: usize,
    vertices: Vec<usize>,
    /// Neighbour lists as indices into `vertices`.
    neighbors: Vec<Vec<u32>>,
}

impl BoundaryShell {
    pub fn build(grid: &GridSpec, l: f64) -> Result<Self> {
        let window = grid.box_window(l)?;
        let k = window.k;
        let d = grid.dim();
        let shape = grid.cells();
        let strides = strides_of(shape);
        let origin = grid.origin_index();

        // Enumerate shell vertices in row-major order of the window.
        let mut vertices = Vec::new();
        let mut shell_index = std::collections::HashMap::new();
        let side = window.side();
        let mut idx = vec![0usize; d];
        'outer: loop {
            let mut cheb = 0usize;
            for ax in 0..d {
                cheb = cheb.max((window.start[ax] + idx[ax]).abs_diff(origin[ax]));
            }
            if cheb == k {
                let lin: usize = idx
                    .iter()
                    .enumerate()
                    .map(|(ax, &i)| (window.start[ax] + i) * strides[ax])
                    .sum();
                shell_index.insert(lin, vertices.len() as u32);
                vertices.push(lin);
            }
            let mut ax = d;
            loop {
                if ax == 0 {
                    break 'outer;
                }
                ax -= 1;
                if idx[ax] < side - 1 {
                    idx[ax] += 1;
                    for r in ax + 1..d {
                        idx[r] = 0;
                    }
                    break;
                }
            }
        }

        let mut neighbors = vec![Vec::new(); vertices.len()];
        for (si, &lin) in vertices.iter().enumerate() {
            for ax in 0..d {
                for dir in [-1isize, 1] {
                    // Reconstruct the axis index to guard the grid edge.
                    let mut rem = lin;
                    let mut coord = 0usize;
                    for a in 0..=ax {
                        coord = rem / strides[a];
                        rem %= strides[a];
                    }
                    let t = coord as isize + dir;
                    if t < 0 || t >= shape[ax] as isize {
                        continue;
                    }
                    let nb = (lin as isize + dir * strides[ax] as isize) as usize;
                    if let Some(&sj) = shell_index.get(&nb) {
                        neighbors[si].push(sj);
                    }
                }
            }
        }

        Ok(BoundaryShell {
            k,
            vertices,
            neighbors,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Linear grid indices of the shell vertices.
    pub fn vertex_indices(&self) -> &[usize] {
        &self.vertices
    }

    /// Connected components of `{v in shell : keep(linear index of v)}`
    /// under the shell adjacency.
    pub fn count_components(&self, keep: impl Fn(usize) -> bool) -> usize {
        let n = self.vertices.len();
        let mut seen = vec![false; n];
        let mut components = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if seen[start] || !keep(self.vertices[start]) {
                continue;
            }
            components += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for &nb in &self.neighbors[v] {
                    let nb = nb as usize;
                    if !seen[nb] && keep(self.vertices[nb]) {
                        seen[nb] = true;
                        stack.push(nb);
                    }
                }
            }
        }
        components
    }

    /// Weak local maxima of the values restricted to the shell graph:
    /// vertices whose value is >= every shell neighbour's value. Isolated
    /// shell vertices (the 1-d shell) count.
    pub fn count_weak_maxima(&self, values: &[f64]) -> usize {
        self.vertices
            .iter()
            .enumerate()
            .filter(|&(si, &lin)| {
                self.neighbors[si]
                    .iter()
                    .all(|&nb| values[lin] >= values[self.vertices[nb as usize]])
            })
            .count()
    }
}

/// Components of the mask restricted to the boundary shell of `[-l, l]^d`.
pub fn count_boundary_components(m: &ExcursionMask, l: f64) -> Result<usize> {
    let shell = BoundaryShell::build(m.grid(), l)?;
    Ok(shell.count_components(|lin| m.bits()[lin]))
}

/// Weak local maxima of the sample on the boundary shell of `[-l, l]^d`.
/// For every level, the number of excursion components on the shell is at
/// most this count (each component contains its own argmax, which is a weak
/// maximum of the restriction).
pub fn count_shell_local_maxima(s: &FieldSample, l: f64) -> Result<usize> {
    let shell = BoundaryShell::build(s.grid(), l)?;
    Ok(shell.count_weak_maxima(s.values_flat()))
}

/// Monte Carlo Kac-Rice estimate of the critical-point density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalDensity {
    /// Expected critical points per unit volume.
    pub density: f64,
    pub standard_error: f64,
    pub n_samples: usize,
    /// Variance of each first derivative.
    pub gradient_variance: f64,
    /// Common scale of the fourth-order derivative covariances.
    pub fourth_moment: f64,
    /// (2 pi)^{-d/2} gradient_variance^{-d/2}: the gradient density at zero.
    pub zero_gradient_density: f64,
    pub mean_abs_determinant: f64,
}

/// Draw signed Hessian determinants from the exact stationary-field law at a
/// point: diagonal entries have covariance c4 (1 + 2 delta_ij), off-diagonal
/// entries are independent with variance c4, where c4 is four times the
/// second derivative of the radial profile in the squared-radius variable.
pub fn hessian_determinant_samples(
    kernel: &KernelSpec,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let d = kernel.dimension();
    let (_, g2) = kernel.squared_radius_curvatures()?;
    let c4 = 4.0 * g2;
    if !(c4 > 0.0) {
        return Err(Error::InvalidKernel(format!(
            "fourth spectral moment scale {c4} must be positive"
        )));
    }

    // Cholesky factor of c4 (J + 2I) for the diagonal entries.
    let mut cov = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            cov[i * d + j] = c4 * if i == j { 3.0 } else { 1.0 };
        }
    }
    let chol = cholesky(&cov, d);

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let n_off = d * (d - 1) / 2;
    let mut dets = Vec::with_capacity(n_samples);
    let mut z = vec![0.0f64; d];
    let mut h = vec![0.0f64; d * d];
    for _ in 0..n_samples {
        for zi in z.iter_mut() {
            *zi = normal.sample(&mut rng);
        }
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += chol[i * d + j] * z[j];
            }
            h[i * d + i] = acc;
        }
        let sd = c4.sqrt();
        let mut pair = 0;
        for i in 0..d {
            for j in i + 1..d {
                let v: f64 = normal.sample(&mut rng);
                h[i * d + j] = sd * v;
                h[j * d + i] = h[i * d + j];
                pair += 1;
            }
        }
        debug_assert_eq!(pair, n_off);
        dets.push(det_small(&h, d));
    }
    Ok(dets)
}

/// Kac-Rice critical-point density: the zero-gradient density times the
/// mean absolute Hessian determinant. The gradient is independent of the
/// Hessian at a point for stationary fields, so the conditional expectation
/// is an unconditional Monte Carlo average.
pub fn kac_rice_density_mc(
    kernel: &KernelSpec,
    n_samples: usize,
    seed: u64,
) -> Result<CriticalDensity> {
    if n_samples < 2 {
        return Err(Error::TooFewSamples {
            min: 2,
            got: n_samples,
        });
    }
    let d = kernel.dimension();
    let (g1, g2) = kernel.squared_radius_curvatures()?;
    let lambda = -2.0 * g1;
    if !(lambda > 0.0) {
        return Err(Error::InvalidKernel(format!(
            "gradient variance {lambda} must be positive"
        )));
    }
    let c4 = 4.0 * g2;

    let dets = hessian_determinant_samples(kernel, n_samples, seed)?;
    let n = n_samples as f64;
    let mean_abs = dets.iter().map(|v| v.abs()).sum::<f64>() / n;
    let var = dets
        .iter()
        .map(|v| {
            let e = v.abs() - mean_abs;
            e * e
        })
        .sum::<f64>()
        / (n - 1.0);
    let se_mean = (var / n).sqrt();

    let p0 = (2.0 * std::f64::consts::PI * lambda).powf(-(d as f64) / 2.0);
    Ok(CriticalDensity {
        density: p0 * mean_abs,
        standard_error: p0 * se_mean,
        n_samples,
        gradient_variance: lambda,
        fourth_moment: c4,
        zero_gradient_density: p0,
        mean_abs_determinant: mean_abs,
    })
}

fn cholesky(a: &[f64], d: usize) -> Vec<f64> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut sum = a[i * d + j];
            for k in 0..j {
                sum -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                assert!(sum > 0.0, "matrix is not positive definite");
                l[i * d + j] = sum.sqrt();
            } else {
                l[i * d + j] = sum / l[j * d + j];
            }
        }
    }
    l
}

fn det_small(h: &[f64], d: usize) -> f64 {
    match d {
        1 => h[0],
        2 => h[0] * h[3] - h[1] * h[2],
        3 => {
            h[0] * (h[4] * h[8] - h[5] * h[7]) - h[1] * (h[3] * h[8] - h[5] * h[6])
                + h[2] * (h[3] * h[7] - h[4] * h[6])
        }
        _ => unreachable!("dimensions are 1..=3"),
    }
}
