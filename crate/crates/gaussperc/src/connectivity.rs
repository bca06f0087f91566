//! Excursion and nodal masks, connected-component labeling, giant-component
//! criteria, and the percolation-equivalence check between a mask and a
//! pointwise-larger mask outside a ball.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{copy_window, for_each_index, strides_of, GridSpec};
use crate::synthesis::FieldSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adjacency {
    /// 2d face neighbours; the standard site convention whose complement is
    /// implicitly (3^d - 1)-connected.
    Faces,
    /// All 3^d - 1 neighbours.
    FacesAndDiagonals,
}

/// Boolean grid, usually `{f >= level}`. Ties sit inside the mask (closed
/// superlevel set).
#[derive(Debug, Clone, PartialEq)]
pub struct ExcursionMask {
    grid: GridSpec,
    bits: Vec<bool>,
    level: f64,
    source: String,
}

impl ExcursionMask {
    pub fn from_bits(
        grid: GridSpec,
        bits: Vec<bool>,
        level: f64,
        source: impl Into<String>,
    ) -> Result<Self> {
        if bits.len() != grid.n_vertices() {
            return Err(Error::InvalidGrid(format!(
                "{} bits for a grid of {} vertices",
                bits.len(),
                grid.n_vertices()
            )));
        }
        Ok(ExcursionMask {
            grid,
            bits,
            level,
            source: source.into(),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn count_true(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Restrict to the centered box `[-l, l]^d`.
    pub fn window(&self, l: f64) -> Result<ExcursionMask> {
        let w = self.grid.box_window(l)?;
        let bits = copy_window(&self.bits, self.grid.cells(), &w);
        let grid = GridSpec::centered(self.grid.dim(), w.k, self.grid.spacing()[0])?;
        ExcursionMask::from_bits(grid, bits, self.level, self.source.clone())
    }

    /// Copy with the vertices of the origin-centered open ball of the given
    /// radius cleared.
    pub fn minus_ball(&self, radius: f64) -> ExcursionMask {
        self.minus_ball_at(&vec![0.0; self.grid.dim()], radius)
    }

    /// Copy with the vertices of the open ball around `center` cleared.
    pub fn minus_ball_at(&self, center: &[f64], radius: f64) -> ExcursionMask {
        let mut bits = self.bits.clone();
        for lin in self.grid.ball_vertices(center, radius) {
            bits[lin] = false;
        }
        ExcursionMask {
            grid: self.grid.clone(),
            bits,
            level: self.level,
            source: self.source.clone(),
        }
    }
}

/// `{f >= level}` on the sample's grid; ties included.
pub fn excursion_mask(s: &FieldSample, level: f64) -> ExcursionMask {
    let bits = s.values_flat().iter().map(|&v| v >= level).collect();
    ExcursionMask {
        grid: s.grid().clone(),
        bits,
        level,
        source: sample_id(s),
    }
}

/// `{f <= level}`; the mirror mask used by the level-symmetry checks.
pub fn sublevel_mask(s: &FieldSample, level: f64) -> ExcursionMask {
    let bits = s.values_flat().iter().map(|&v| v <= level).collect();
    ExcursionMask {
        grid: s.grid().clone(),
        bits,
        level,
        source: format!("{}<=", sample_id(s)),
    }
}

fn sample_id(s: &FieldSample) -> String {
    match s.shift_id() {
        Some(shift) => format!("{}:{}+{}", s.kernel_id(), s.seed(), shift),
        None => format!("{}:{}", s.kernel_id(), s.seed()),
    }
}

/// Discrete zero set of `f - level`: a grid cell (unit hypercube spanned by
/// 2^d vertices) is marked iff `f - level` attains both signs (or zero)
/// among its corners. The result lives on the cell grid, which has one
/// vertex fewer per axis.
pub fn nodal_mask(s: &FieldSample, level: f64) -> Result<ExcursionMask> {
    let vertex_cells = s.grid().cells();
    if vertex_cells.iter().any(|&c| c < 2) {
        return Err(Error::InvalidGrid(
            "nodal mask needs at least 2 vertices per axis".into(),
        ));
    }
    let cell_shape: Vec<usize> = vertex_cells.iter().map(|&c| c - 1).collect();
    let strides = strides_of(vertex_cells);
    let d = vertex_cells.len();
    let flat = s.values_flat();
    let mut bits = Vec::with_capacity(cell_shape.iter().product());
    for_each_index(&cell_shape, |idx, _| {
        let mut base = 0;
        for ax in 0..d {
            base += idx[ax] * strides[ax];
        }
        let mut has_nonneg = false;
        let mut has_nonpos = false;
        for corner in 0..(1usize << d) {
            let mut lin = base;
            for ax in 0..d {
                if corner >> ax & 1 == 1 {
                    lin += strides[ax];
                }
            }
            let v = flat[lin] - level;
            has_nonneg |= v >= 0.0;
            has_nonpos |= v <= 0.0;
        }
        bits.push(has_nonneg && has_nonpos);
    });
    let grid = GridSpec::new(cell_shape, s.grid().spacing().to_vec())?;
    ExcursionMask::from_bits(grid, bits, level, format!("{}:nodal", sample_id(s)))
}

/// Per-component metadata. Components are numbered from 1 in order of their
/// smallest contained linear vertex index (the anchor), so labelings are
/// canonical and comparable across implementations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentInfo {
    pub id: u32,
    pub size: u64,
    pub anchor: usize,
    pub bbox_min: Vec<usize>,
    pub bbox_max: Vec<usize>,
    /// Per axis: does the component touch the low / high grid face?
    pub touches: Vec<[bool; 2]>,
}

impl ComponentInfo {
    fn new(id: u32, d: usize, shape: &[usize]) -> Self {
        ComponentInfo {
            id,
            size: 0,
            anchor: usize::MAX,
            bbox_min: shape.to_vec(),
            bbox_max: vec![0; d],
            touches: vec![[false, false]; d],
        }
    }

    fn absorb(&mut self, idx: &[usize], lin: usize, shape: &[usize]) {
        self.size += 1;
        self.anchor = self.anchor.min(lin);
        for ax in 0..idx.len() {
            self.bbox_min[ax] = self.bbox_min[ax].min(idx[ax]);
            self.bbox_max[ax] = self.bbox_max[ax].max(idx[ax]);
            if idx[ax] == 0 {
                self.touches[ax][0] = true;
            }
            if idx[ax] == shape[ax] - 1 {
                self.touches[ax][1] = true;
            }
        }
    }

    pub fn touches_any(&self) -> bool {
        self.touches.iter().any(|t| t[0] || t[1])
    }

    pub fn touches_all_faces(&self) -> bool {
        self.touches.iter().all(|t| t[0] && t[1])
    }

    pub fn crosses_axis(&self, axis: usize) -> bool {
        self.touches[axis][0] && self.touches[axis][1]
    }
}

/// Partition of the true cells into maximal adjacency-connected sets.
/// Label 0 is background.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeling {
    shape: Vec<usize>,
    labels: Vec<u32>,
    components: Vec<ComponentInfo>,
}

impl Labeling {
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label_at(&self, lin: usize) -> u32 {
        self.labels[lin]
    }

    pub fn count(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ComponentInfo] {
        &self.components
    }

    pub fn component(&self, id: u32) -> &ComponentInfo {
        &self.components[(id - 1) as usize]
    }
}

fn forward_offsets(d: usize, adjacency: Adjacency) -> Vec<Vec<isize>> {
    // Offsets whose first nonzero entry is +1: exactly one of each +/- pair,
    // so a backward scan sees every edge once.
    let mut out = Vec::new();
    let mut delta = vec![-1isize; d];
    loop {
        if delta.iter().any(|&v| v != 0) {
            let first = *delta.iter().find(|&&v| v != 0).unwrap();
            let manhattan: isize = delta.iter().map(|v| v.abs()).sum();
            let keep = match adjacency {
                Adjacency::Faces => manhattan == 1,
                Adjacency::FacesAndDiagonals => true,
            };
            if keep && first > 0 {
                out.push(delta.clone());
            }
        }
        let mut ax = d;
        loop {
            if ax == 0 {
                return out;
            }
            ax -= 1;
            if delta[ax] < 1 {
                delta[ax] += 1;
                for r in ax + 1..d {
                    delta[r] = -1;
                }
                break;
            }
        }
    }
}

fn all_offsets(d: usize, adjacency: Adjacency) -> Vec<Vec<isize>> {
    let mut out = forward_offsets(d, adjacency);
    let mirrored: Vec<Vec<isize>> = out
        .iter()
        .map(|v| v.iter().map(|&x| -x).collect())
        .collect();
    out.extend(mirrored);
    out
}

struct DisjointSets {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grandparent = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grandparent;
            x = grandparent;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        let (big, small) = if self.size[ra as usize] >= self.size[rb as usize] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small as usize] = big;
        self.size[big as usize] += self.size[small as usize];
    }
}

/// Union-find labeling. The production path; checked against
/// [`flood_fill_oracle`] by the differential tests.
pub fn label_components(m: &ExcursionMask, adjacency: Adjacency) -> Labeling {
    let shape = m.grid().cells().to_vec();
    let d = shape.len();
    let strides = strides_of(&shape);
    let bits = m.bits();
    let n = bits.len();

    let mut sets = DisjointSets::new(n);
    let offsets = forward_offsets(d, adjacency);
    // Precompute flat offsets; validity is re-checked per axis against the
    // multi-index, so wraparound cannot alias.
    let flat_offsets: Vec<isize> = offsets
        .iter()
        .map(|off| {
            off.iter()
                .enumerate()
                .map(|(ax, &o)| o * strides[ax] as isize)
                .sum()
        })
        .collect();

    for_each_index(&shape, |idx, lin| {
        if !bits[lin] {
            return;
        }
        'next_offset: for (off, &flat_off) in offsets.iter().zip(&flat_offsets) {
            for ax in 0..d {
                let t = idx[ax] as isize - off[ax];
                if t < 0 || t >= shape[ax] as isize {
                    continue 'next_offset;
                }
            }
            let nb = (lin as isize - flat_off) as usize;
            if bits[nb] {
                sets.union(lin as u32, nb as u32);
            }
        }
    });

    let mut labels = vec![0u32; n];
    let mut root_label = vec![0u32; n];
    let mut components: Vec<ComponentInfo> = Vec::new();
    for_each_index(&shape, |idx, lin| {
        if !bits[lin] {
            return;
        }
        let root = sets.find(lin as u32) as usize;
        if root_label[root] == 0 {
            let id = components.len() as u32 + 1;
            root_label[root] = id;
            components.push(ComponentInfo::new(id, d, &shape));
        }
        let id = root_label[root];
        labels[lin] = id;
        components[(id - 1) as usize].absorb(idx, lin, &shape);
    });

    Labeling {
        shape,
        labels,
        components,
    }
}

/// Breadth-first labeling; an independent oracle implementation kept free of
/// the union-find machinery.
pub fn flood_fill_oracle(m: &ExcursionMask, adjacency: Adjacency) -> Labeling {
    let shape = m.grid().cells().to_vec();
    let d = shape.len();
    let strides = strides_of(&shape);
    let bits = m.bits();
    let n = bits.len();
    let offsets = all_offsets(d, adjacency);

    let mut labels = vec![0u32; n];
    let mut components: Vec<ComponentInfo> = Vec::new();
    let mut queue: VecDeque<Vec<usize>> = VecDeque::new();

    for_each_index(&shape, |idx, lin| {
        if !bits[lin] || labels[lin] != 0 {
            return;
        }
        let id = components.len() as u32 + 1;
        let mut info = ComponentInfo::new(id, d, &shape);
        labels[lin] = id;
        queue.push_back(idx.to_vec());
        while let Some(cur) = queue.pop_front() {
            let cur_lin: usize = cur
                .iter()
                .enumerate()
                .map(|(ax, &i)| i * strides[ax])
                .sum();
            info.absorb(&cur, cur_lin, &shape);
            'next: for off in &offsets {
                let mut nb = cur.clone();
                for ax in 0..d {
                    let t = cur[ax] as isize + off[ax];
                    if t < 0 || t >= shape[ax] as isize {
                        continue 'next;
                    }
                    nb[ax] = t as usize;
                }
                let nb_lin: usize = nb
                    .iter()
                    .enumerate()
                    .map(|(ax, &i)| i * strides[ax])
                    .sum();
                if bits[nb_lin] && labels[nb_lin] == 0 {
                    labels[nb_lin] = id;
                    queue.push_back(nb);
                }
            }
        }
        components.push(info);
    });

    Labeling {
        shape,
        labels,
        components,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GiantCriterion {
    /// Component intersects every face of the box.
    TouchesAllFaces,
    /// Component touches both faces orthogonal to the given axis.
    CrossesAxis(usize),
}

/// Ids of components meeting the giant criterion.
pub fn giant_components(l: &Labeling, criterion: GiantCriterion) -> Vec<u32> {
    l.components()
        .iter()
        .filter(|c| match criterion {
            GiantCriterion::TouchesAllFaces => c.touches_all_faces(),
            GiantCriterion::CrossesAxis(ax) => c.crosses_axis(ax),
        })
        .map(|c| c.id)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquivalenceOutcome {
    Equivalent,
    Merging,
    Emergence,
    Explosion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquivalenceWitness {
    /// Two components of `a \ ball` inside one component of `b \ ball`.
    MergedPair { a_first: u32, a_second: u32, b: u32 },
    /// A component of `b \ ball` containing no component of `a \ ball`.
    EmergedComponent { b: u32, anchor: Vec<usize> },
    /// A bounded component of `a \ ball` (no boundary contact) whose
    /// `b`-component touches the boundary.
    ExplodedComponent { a: u32, b: u32 },
}

/// Verdict of [`percolation_equivalence`]. The outcome reports the most
/// severe failure (merging before emergence before explosion); the event
/// counts cover all failures of each kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceVerdict {
    pub outcome: EquivalenceOutcome,
    pub witness: Option<EquivalenceWitness>,
    pub merging_events: usize,
    pub emergence_events: usize,
    pub explosion_events: usize,
}

impl EquivalenceVerdict {
    pub fn is_equivalent(&self) -> bool {
        self.outcome == EquivalenceOutcome::Equivalent
    }
}

/// Map from components of `a` to the component of `b` containing them.
/// Entry `map[id]` is the b-label for a-label `id` (entry 0 unused). The
/// map is well defined whenever `a` is a subset of `b`; a violation would
/// mean the labeling itself is broken and is reported as such.
pub fn component_inclusion_map(
    a: &ExcursionMask,
    b: &ExcursionMask,
    adjacency: Adjacency,
) -> Result<Vec<u32>> {
    check_subset(a, b)?;
    let la = label_components(a, adjacency);
    let lb = label_components(b, adjacency);
    inclusion_map(a, &la, &lb)
}

fn check_subset(a: &ExcursionMask, b: &ExcursionMask) -> Result<()> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    for (lin, (&x, &y)) in a.bits().iter().zip(b.bits()).enumerate() {
        if x && !y {
            return Err(Error::NotASubset {
                witness: unflatten(lin, a.grid().cells()),
            });
        }
    }
    Ok(())
}

fn inclusion_map(a: &ExcursionMask, la: &Labeling, lb: &Labeling) -> Result<Vec<u32>> {
    let mut map = vec![0u32; la.count() + 1];
    for (lin, &bit) in a.bits().iter().enumerate() {
        if !bit {
            continue;
        }
        let ca = la.label_at(lin);
        let cb = lb.label_at(lin);
        if cb == 0 {
            return Err(Error::InvariantViolation(format!(
                "vertex {lin} in the low mask is unlabeled in the high mask"
            )));
        }
        if map[ca as usize] == 0 {
            map[ca as usize] = cb;
        } else if map[ca as usize] != cb {
            return Err(Error::InvariantViolation(format!(
                "component {ca} of the low mask spans components {} and {cb} of the high mask",
                map[ca as usize]
            )));
        }
    }
    Ok(map)
}

fn unflatten(mut lin: usize, shape: &[usize]) -> Vec<usize> {
    let mut idx = vec![0usize; shape.len()];
    for ax in (0..shape.len()).rev() {
        idx[ax] = lin % shape[ax];
        lin /= shape[ax];
    }
    idx
}

/// Decide percolation equivalence of `a` and `b` outside the origin ball of
/// radius `r`: every component of `b \ ball` must contain exactly one
/// component of `a \ ball`, and boundary contact (the boundedness proxy)
/// must agree. Requires `a` to be a subset of `b` on a common grid.
pub fn percolation_equivalence(
    a: &ExcursionMask,
    b: &ExcursionMask,
    r: f64,
) -> Result<EquivalenceVerdict> {
    check_subset(a, b)?;
    let a_cut = a.minus_ball(r);
    let b_cut = b.minus_ball(r);
    let la = label_components(&a_cut, Adjacency::Faces);
    let lb = label_components(&b_cut, Adjacency::Faces);
    let map = inclusion_map(&a_cut, &la, &lb)?;

    // How many a-components land in each b-component, remembering the first
    // two for the witness.
    let mut hits = vec![0usize; lb.count() + 1];
    let mut first_a = vec![0u32; lb.count() + 1];
    let mut second_a = vec![0u32; lb.count() + 1];
    for ca in 1..=la.count() as u32 {
        let cb = map[ca as usize] as usize;
        hits[cb] += 1;
        if first_a[cb] == 0 {
            first_a[cb] = ca;
        } else if second_a[cb] == 0 {
            second_a[cb] = ca;
        }
    }

    let mut merging_events = 0;
    let mut emergence_events = 0;
    let mut explosion_events = 0;
    let mut merge_witness = None;
    let mut emerge_witness = None;
    let mut explode_witness = None;

    for cb in 1..=lb.count() as u32 {
        match hits[cb as usize] {
            0 => {
                emergence_events += 1;
                if emerge_witness.is_none() {
                    emerge_witness = Some(EquivalenceWitness::EmergedComponent {
                        b: cb,
                        anchor: unflatten(lb.component(cb).anchor, lb.shape()),
                    });
                }
            }
            1 => {}
            _ => {
                merging_events += 1;
                if merge_witness.is_none() {
                    merge_witness = Some(EquivalenceWitness::MergedPair {
                        a_first: first_a[cb as usize],
                        a_second: second_a[cb as usize],
                        b: cb,
                    });
                }
            }
        }
    }

    for ca in 1..=la.count() as u32 {
        let cb = map[ca as usize];
        if !la.component(ca).touches_any() && lb.component(cb).touches_any() {
            explosion_events += 1;
            if explode_witness.is_none() {
                explode_witness = Some(EquivalenceWitness::ExplodedComponent { a: ca, b: cb });
            }
        }
    }

    let (outcome, witness) = if merging_events > 0 {
        (EquivalenceOutcome::Merging, merge_witness)
    } else if emergence_events > 0 {
        (EquivalenceOutcome::Emergence, emerge_witness)
    } else if explosion_events > 0 {
        (EquivalenceOutcome::Explosion, explode_witness)
    } else {
        (EquivalenceOutcome::Equivalent, None)
    };

    Ok(EquivalenceVerdict {
        outcome,
        witness,
        merging_events,
        emergence_events,
        explosion_events,
    })
}
