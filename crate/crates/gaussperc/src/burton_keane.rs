//! Coarse trifurcation detection and the deterministic inequality tying
//! trifurcation counts to boundary-component counts: on every mask,
//! `T_L <= max(0, N_boundary - 2)`. A violation means the labeling or the
//! counting machinery is broken, so every ensemble asserts it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::connectivity::{label_components, Adjacency, ExcursionMask, Labeling};
use crate::counting::count_boundary_components;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::kernels::KernelSpec;
use crate::synthesis::CirculantEmbedding;

/// Outcome of a single trifurcation check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrifurcationCheck {
    pub trifurcates: bool,
    /// Labels (in the ball-removed labeling) of the branches that stay in
    /// the original component and touch the box boundary.
    pub branch_ids: Vec<u32>,
}

/// A point coarsely trifurcates when its component touches the box boundary
/// and deleting the open ball of radius `r` around it leaves at least three
/// components that are subsets of the original component and still touch
/// the box boundary.
pub fn detect_trifurcation(m: &ExcursionMask, x: &[f64], r: f64) -> Result<TrifurcationCheck> {
    let base = label_components(m, Adjacency::Faces);
    detect_with_base(m, &base, x, r)
}

fn check_margin(grid: &GridSpec, x: &[f64], r: f64) -> Result<()> {
    if x.len() != grid.dim() {
        return Err(Error::GridMismatch);
    }
    for ax in 0..grid.dim() {
        let lo = grid.coord(ax, 0);
        let hi = grid.coord(ax, grid.cells()[ax] - 1);
        if x[ax] - 2.0 * r < lo || x[ax] + 2.0 * r > hi {
            return Err(Error::MarginViolation {
                center: x.to_vec(),
                radius: r,
            });
        }
    }
    Ok(())
}

fn detect_with_base(
    m: &ExcursionMask,
    base: &Labeling,
    x: &[f64],
    r: f64,
) -> Result<TrifurcationCheck> {
    check_margin(m.grid(), x, r)?;
    let none = TrifurcationCheck {
        trifurcates: false,
        branch_ids: Vec::new(),
    };

    let vertex = match m.grid().nearest_vertex(x) {
        Some(v) => m.grid().linear_index(&v),
        None => return Ok(none),
    };
    if !m.bits()[vertex] {
        return Ok(none);
    }
    let home = base.label_at(vertex);
    if !base.component(home).touches_any() {
        return Ok(none);
    }

    let removed = m.minus_ball_at(x, r);
    let cut = label_components(&removed, Adjacency::Faces);
    let mut branch_ids = Vec::new();
    for c in cut.components() {
        // A component of the cut mask is connected in the full mask too, so
        // its anchor's label locates it inside exactly one base component.
        if base.label_at(c.anchor) == home && c.touches_any() {
            branch_ids.push(c.id);
        }
    }
    Ok(TrifurcationCheck {
        trifurcates: branch_ids.len() >= 3,
        branch_ids,
    })
}

/// One tested lattice point inside a [`TrifurcationReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointVerdict {
    pub x: Vec<f64>,
    pub trifurcates: bool,
    pub branch_ids: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrifurcationReport {
    pub l: f64,
    pub r: f64,
    pub level: f64,
    pub verdicts: Vec<PointVerdict>,
    pub t_l: usize,
    pub n_boundary: usize,
    pub inequality_ok: bool,
}

/// Points of `4r Z^d` strictly inside the ball of radius `l - 2r`.
fn coarse_lattice(d: usize, r: f64, l: f64) -> Vec<Vec<f64>> {
    let step = 4.0 * r;
    let rad = l - 2.0 * r;
    if rad <= 0.0 {
        return Vec::new();
    }
    let kmax = (rad / step).ceil() as isize;
    let bound = rad * rad;
    let mut out = Vec::new();
    let mut k = vec![-kmax; d];
    loop {
        let norm2: f64 = k.iter().map(|&v| (v as f64 * step).powi(2)).sum();
        if norm2 < bound {
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

/// Test every point of the coarse lattice `4r Z^d` inside the ball of
/// radius `l - 2r`, restricted to the window `[-l, l]^d` of the mask, and
/// compare the trifurcation count against the boundary-component bound.
pub fn count_trifurcations(m: &ExcursionMask, r: f64, l: f64) -> Result<TrifurcationReport> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "trifurcation ball radius {r} must be positive"
        )));
    }
    let window = m.window(l)?;
    let lattice = coarse_lattice(window.grid().dim(), r, l);

    // The 4r spacing makes the removed balls pairwise disjoint; check it
    // rather than assume it.
    for (i, a) in lattice.iter().enumerate() {
        for b in lattice.iter().skip(i + 1) {
            let dist2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
            if dist2 <= (2.0 * r) * (2.0 * r) {
                return Err(Error::InvariantViolation(format!(
                    "lattice points {a:?} and {b:?} have overlapping balls of radius {r}"
                )));
            }
        }
    }

    let base = label_components(&window, Adjacency::Faces);
    let verdicts: Vec<PointVerdict> = lattice
        .into_par_iter()
        .map(|x| {
            let check = detect_with_base(&window, &base, &x, r)?;
            Ok(PointVerdict {
                x,
                trifurcates: check.trifurcates,
                branch_ids: check.branch_ids,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let t_l = verdicts.iter().filter(|v| v.trifurcates).count();
    let n_boundary = count_boundary_components(&window, l)?;
    let inequality_ok = t_l <= n_boundary.saturating_sub(2);
    Ok(TrifurcationReport {
        l,
        r,
        level: m.level(),
        verdicts,
        t_l,
        n_boundary,
        inequality_ok,
    })
}

/// One row of [`trifurcation_density_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub l: f64,
    pub n_samples: usize,
    pub lattice_points: usize,
    pub mean_t: f64,
    /// Standard error of the mean trifurcation count.
    pub se_t: f64,
    pub mean_boundary: f64,
    /// mean_t / l^d.
    pub trifurcation_density: f64,
    /// mean_boundary / l^{d-1}.
    pub boundary_density: f64,
    /// Masks on which the deterministic inequality failed; must be zero.
    pub violations: usize,
}

/// Sample `n_per_l` fields per box scale and tabulate the trifurcation and
/// boundary-component densities. Under uniqueness the first is consistent
/// with zero while the second stays bounded.
pub fn trifurcation_density_sweep(
    kernel: &KernelSpec,
    level: f64,
    r: f64,
    ls: &[f64],
    spacing: f64,
    n_per_l: usize,
    base_seed: u64,
) -> Result<Vec<SweepRow>> {
    let d = kernel.dimension();
    let mut rows = Vec::with_capacity(ls.len());
    for (li, &l) in ls.iter().enumerate() {
        let half = l / spacing;
        if (half.round() - half).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "box scale {l} is not a multiple of the spacing {spacing}"
            )));
        }
        let grid = GridSpec::centered(d, half.round() as usize, spacing)?;
        let plan = CirculantEmbedding::plan(kernel, &grid)?;
        let samples = plan.ensemble(crate::rng::derive_seed(base_seed, li as u64), n_per_l);
        let per_sample: Vec<(usize, usize, bool)> = samples
            .par_iter()
            .map(|s| {
                let mask = crate::connectivity::excursion_mask(s, level);
                let report = count_trifurcations(&mask, r, l)?;
                Ok((report.t_l, report.n_boundary, report.inequality_ok))
            })
            .collect::<Result<Vec<_>>>()?;

        let n = per_sample.len() as f64;
        let mean_t = per_sample.iter().map(|&(t, _, _)| t as f64).sum::<f64>() / n;
        let var_t = per_sample
            .iter()
            .map(|&(t, _, _)| (t as f64 - mean_t).powi(2))
            .sum::<f64>()
            / (n - 1.0).max(1.0);
        let se_t = (var_t / n).sqrt();
        let mean_boundary = per_sample.iter().map(|&(_, b, _)| b as f64).sum::<f64>() / n;
        let violations = per_sample.iter().filter(|&&(_, _, ok)| !ok).count();

        rows.push(SweepRow {
            l,
            n_samples: n_per_l,
            lattice_points: coarse_lattice(d, r, l).len(),
            mean_t,
            se_t,
            mean_boundary,
            trifurcation_density: mean_t / l.powi(d as i32),
            boundary_density: mean_boundary / l.powi(d as i32 - 1),
            violations,
        });
    }
    Ok(rows)
}
