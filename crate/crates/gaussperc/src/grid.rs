//! Regular grids that discretize a centered box in 1, 2, or 3 dimensions.
//!
//! A grid stores the number of vertices per axis ("cells") and the physical
//! spacing between neighbours. The origin of physical space always sits on a
//! vertex: vertex `i` along an axis lies at `(i - cells/2) * spacing`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    cells: Vec<usize>,
    spacing: Vec<f64>,
}

impl GridSpec {
    pub fn new(cells: Vec<usize>, spacing: Vec<f64>) -> Result<Self> {
        let d = cells.len();
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1..={MAX_DIM}, got {d}"
            )));
        }
        if spacing.len() != d {
            return Err(Error::InvalidGrid(format!(
                "{} spacings for {} axes",
                spacing.len(),
                d
            )));
        }
        if cells.iter().any(|&c| c == 0) {
            return Err(Error::InvalidGrid("zero vertices on an axis".into()));
        }
        if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(Error::InvalidGrid("spacing must be finite and positive".into()));
        }
        let total: usize = cells.iter().product();
        if total > (1 << 31) {
            return Err(Error::InvalidGrid(format!("{total} vertices is too large")));
        }
        Ok(GridSpec { cells, spacing })
    }

    /// Cube with `cells` vertices per axis spanning an extent of `extent`
    /// physical units, so the spacing is `extent / cells`.
    pub fn cubic(dim: usize, cells: usize, extent: f64) -> Result<Self> {
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::InvalidGrid("extent must be finite and positive".into()));
        }
        let spacing = extent / cells as f64;
        GridSpec::new(vec![cells; dim], vec![spacing; dim])
    }

    /// Odd cube with `2 * half + 1` vertices per axis, so the vertices cover
    /// `[-half * spacing, half * spacing]` symmetrically around the origin.
    pub fn centered(dim: usize, half: usize, spacing: f64) -> Result<Self> {
        GridSpec::new(vec![2 * half + 1; dim], vec![spacing; dim])
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn n_vertices(&self) -> usize {
        self.cells.iter().product()
    }

    /// Index of the vertex at the physical origin.
    pub fn origin_index(&self) -> Vec<usize> {
        self.cells.iter().map(|&c| c / 2).collect()
    }

    pub fn coord(&self, axis: usize, index: usize) -> f64 {
        (index as f64 - (self.cells[axis] / 2) as f64) * self.spacing[axis]
    }

    pub fn position(&self, index: &[usize]) -> Vec<f64> {
        index
            .iter()
            .enumerate()
            .map(|(ax, &i)| self.coord(ax, i))
            .collect()
    }

    /// Nearest vertex to a physical position, or None if it falls outside.
    pub fn nearest_vertex(&self, position: &[f64]) -> Option<Vec<usize>> {
        let mut idx = Vec::with_capacity(self.dim());
        for ax in 0..self.dim() {
            let raw = position[ax] / self.spacing[ax] + (self.cells[ax] / 2) as f64;
            let i = raw.round();
            if i < 0.0 || i >= self.cells[ax] as f64 {
                return None;
            }
            idx.push(i as usize);
        }
        Some(idx)
    }

    /// True when every axis has the same vertex count and spacing.
    pub fn is_cubic(&self) -> bool {
        self.cells.iter().all(|&c| c == self.cells[0])
            && self.spacing.iter().all(|&s| s == self.spacing[0])
    }

    pub fn require_cubic(&self) -> Result<(usize, f64)> {
        if !self.is_cubic() {
            return Err(Error::NotCubic(format!(
                "cells {:?}, spacing {:?}",
                self.cells, self.spacing
            )));
        }
        Ok((self.cells[0], self.spacing[0]))
    }

    /// Largest physical coordinate reachable on each side of the origin,
    /// minimized over axes. Windows and shells must fit inside this.
    pub fn reach(&self) -> f64 {
        (0..self.dim())
            .map(|ax| {
                let o = self.cells[ax] / 2;
                let below = o as f64 * self.spacing[ax];
                let above = (self.cells[ax] - 1 - o) as f64 * self.spacing[ax];
                below.min(above)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Index window of the centered box `[-l, l]^d`: per-axis start and the
    /// one-sided vertex count `k` (the window spans `2k + 1` vertices).
    pub fn box_window(&self, l: f64) -> Result<BoxWindow> {
        let (_, step) = self.require_cubic()?;
        let k = (l / step).round() as isize;
        if k < 0 {
            return Err(Error::InvalidGrid(format!("box scale {l} is negative")));
        }
        let k = k as usize;
        let origin = self.origin_index();
        for ax in 0..self.dim() {
            if origin[ax] < k || origin[ax] + k >= self.cells[ax] {
                return Err(Error::ShellExceedsGrid { l });
            }
        }
        Ok(BoxWindow {
            start: origin.iter().map(|&o| o - k).collect(),
            k,
        })
    }

    pub fn linear_index(&self, index: &[usize]) -> usize {
        let mut lin = 0;
        for (ax, &i) in index.iter().enumerate() {
            lin = lin * self.cells[ax] + i;
        }
        lin
    }

    /// Linear indices of vertices with Euclidean physical distance to
    /// `center` strictly below `radius`.
    pub fn ball_vertices(&self, center: &[f64], radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        let mut ranges = Vec::with_capacity(self.dim());
        for ax in 0..self.dim() {
            let o = (self.cells[ax] / 2) as f64;
            let lo = ((center[ax] - radius) / self.spacing[ax] + o).floor().max(0.0) as usize;
            let hi_f = ((center[ax] + radius) / self.spacing[ax] + o).ceil();
            let hi = (hi_f.max(0.0) as usize).min(self.cells[ax] - 1);
            if lo > hi {
                return out;
            }
            ranges.push(lo..=hi);
        }
        let mut idx: Vec<usize> = ranges.iter().map(|r| *r.start()).collect();
        loop {
            let mut dist2 = 0.0;
            for ax in 0..self.dim() {
                let dx = self.coord(ax, idx[ax]) - center[ax];
                dist2 += dx * dx;
            }
            if dist2 < radius * radius {
                out.push(self.linear_index(&idx));
            }
            let mut ax = self.dim();
            loop {
                if ax == 0 {
                    return out;
                }
                ax -= 1;
                if idx[ax] < *ranges[ax].end() {
                    idx[ax] += 1;
                    for r in ax + 1..self.dim() {
                        idx[r] = *ranges[r].start();
                    }
                    break;
                }
            }
        }
    }
}

/// Index window of a centered sub-box; see [`GridSpec::box_window`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxWindow {
    pub start: Vec<usize>,
    pub k: usize,
}

impl BoxWindow {
    /// Vertices per axis inside the window.
    pub fn side(&self) -> usize {
        2 * self.k + 1
    }
}

/// Copy the centered sub-box described by `window` out of a row-major flat
/// array of the given shape.
pub fn copy_window<T: Copy>(src: &[T], shape: &[usize], window: &BoxWindow) -> Vec<T> {
    let strides = strides_of(shape);
    let side = window.side();
    let sub_shape = vec![side; shape.len()];
    let mut out = Vec::with_capacity(side.pow(shape.len() as u32));
    for_each_index(&sub_shape, |idx, _| {
        let mut lin = 0;
        for ax in 0..shape.len() {
            lin += (window.start[ax] + idx[ax]) * strides[ax];
        }
        out.push(src[lin]);
    });
    out
}

/// Row-major strides for a shape.
pub fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for ax in (0..shape.len().saturating_sub(1)).rev() {
        strides[ax] = strides[ax + 1] * shape[ax + 1];
    }
    strides
}

/// Visit every multi-index of `shape` in row-major order together with its
/// linear position.
pub fn for_each_index(shape: &[usize], mut f: impl FnMut(&[usize], usize)) {
    if shape.iter().any(|&c| c == 0) {
        return;
    }
    let d = shape.len();
    let mut idx = vec![0usize; d];
    let mut lin = 0usize;
    loop {
        f(&idx, lin);
        lin += 1;
        let mut ax = d;
        loop {
            if ax == 0 {
                return;
            }
            ax -= 1;
            idx[ax] += 1;
            if idx[ax] < shape[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
}
