//! Visit-fraction occupancy grids over relative-pose features and their
//! face-connected components.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::model::{RelPoseFeature, FEATURE_DIM};

/// Axes whose observed span is below this are collapsed to one cell.
const DEGENERATE_SPAN: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    pub lo: [f64; FEATURE_DIM],
    pub hi: [f64; FEATURE_DIM],
    pub res: [usize; FEATURE_DIM],
    /// Fraction of trajectories with at least one feature in each cell.
    pub f: Vec<f64>,
    pub trajectories: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub id: usize,
    /// Flat cell indices in increasing order.
    pub cells: Vec<usize>,
}

impl OccupancyGrid {
    /// Grid over `bounds` (lo, hi per axis) with `resolution` cells per
    /// non-degenerate axis. All counts start at zero.
    pub fn empty(lo: [f64; FEATURE_DIM], hi: [f64; FEATURE_DIM], res: [usize; FEATURE_DIM]) -> OccupancyGrid {
        let n = res.iter().product();
        OccupancyGrid { lo, hi, res, f: vec![0.0; n], trajectories: 0 }
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn cell_width(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.res[axis] as f64
    }

    pub fn coords(&self, mut flat: usize) -> [usize; FEATURE_DIM] {
        let mut c = [0; FEATURE_DIM];
        for a in (0..FEATURE_DIM).rev() {
            c[a] = flat % self.res[a];
            flat /= self.res[a];
        }
        c
    }

    pub fn flat(&self, c: &[usize; FEATURE_DIM]) -> usize {
        let mut i = 0;
        for a in 0..FEATURE_DIM {
            i = i * self.res[a] + c[a];
        }
        i
    }

    /// Cell containing `x`; points outside the bounds are clamped to the border.
    pub fn cell_of(&self, x: &RelPoseFeature) -> usize {
        let mut c = [0; FEATURE_DIM];
        for a in 0..FEATURE_DIM {
            let w = self.cell_width(a);
            let i = libm::floor((x[a] - self.lo[a]) / w);
            c[a] = if i < 0.0 { 0 } else { (i as usize).min(self.res[a] - 1) };
        }
        self.flat(&c)
    }

    /// Cell containing `x`, or `None` if `x` lies outside the bounds.
    pub fn cell_in(&self, x: &RelPoseFeature) -> Option<usize> {
        for a in 0..FEATURE_DIM {
            if !(x[a] >= self.lo[a] && x[a] <= self.hi[a]) {
                return None;
            }
        }
        Some(self.cell_of(x))
    }

    /// Lower corner of a cell.
    pub fn cell_lo(&self, flat: usize) -> [f64; FEATURE_DIM] {
        let c = self.coords(flat);
        let mut lo = [0.0; FEATURE_DIM];
        for a in 0..FEATURE_DIM {
            lo[a] = self.lo[a] + c[a] as f64 * self.cell_width(a);
        }
        lo
    }
}

/// Bounding box of all features, widened by `margin` of the span on each side.
/// The heading axes (cosine, sine) use the full `[-1, 1]` range so cell size
/// does not depend on how little headings vary. Degenerate axes get a tiny
/// symmetric box and resolution 1.
pub fn grid_bounds(
    trajs: &[Vec<RelPoseFeature>],
    resolution: usize,
    margin: f64,
) -> Option<([f64; FEATURE_DIM], [f64; FEATURE_DIM], [usize; FEATURE_DIM])> {
    let mut lo = [f64::INFINITY; FEATURE_DIM];
    let mut hi = [f64::NEG_INFINITY; FEATURE_DIM];
    let mut any = false;
    for t in trajs {
        for x in t {
            any = true;
            for a in 0..FEATURE_DIM {
                lo[a] = lo[a].min(x[a]);
                hi[a] = hi[a].max(x[a]);
            }
        }
    }
    if !any {
        return None;
    }
    let mut res = [resolution; FEATURE_DIM];
    for a in 0..FEATURE_DIM {
        let span = hi[a] - lo[a];
        if span < DEGENERATE_SPAN {
            res[a] = 1;
            lo[a] -= DEGENERATE_SPAN;
            hi[a] += DEGENERATE_SPAN;
        } else {
            if a >= 2 {
                lo[a] = -1.0;
                hi[a] = 1.0;
            }
            let span = hi[a] - lo[a];
            lo[a] -= margin * span;
            hi[a] += margin * span;
        }
    }
    Some((lo, hi, res))
}

/// Accumulates visit fractions: `f = #trajectories visiting cell / #trajectories`.
/// Features outside the bounds are not counted.
pub fn accumulate(grid: &mut OccupancyGrid, trajs: &[Vec<RelPoseFeature>]) {
    let mut count = vec![0u32; grid.len()];
    let mut last = vec![u32::MAX; grid.len()];
    for (t, feats) in trajs.iter().enumerate() {
        for x in feats {
            let c = match grid.cell_in(x) {
                Some(c) => c,
                None => continue,
            };
            if last[c] != t as u32 {
                last[c] = t as u32;
                count[c] += 1;
            }
        }
    }
    let n = trajs.len().max(1) as f64;
    for (f, c) in grid.f.iter_mut().zip(count) {
        *f = c as f64 / n;
    }
    grid.trajectories = trajs.len();
}

/// Grid over the observed features of one type pair; each inner vector holds
/// every instance-pair feature of one trajectory.
pub fn build_grid(trajs: &[Vec<RelPoseFeature>], resolution: usize, margin: f64) -> Option<OccupancyGrid> {
    let (lo, hi, res) = grid_bounds(trajs, resolution, margin)?;
    let mut g = OccupancyGrid::empty(lo, hi, res);
    accumulate(&mut g, trajs);
    Some(g)
}

/// Visits the face neighbours of `flat` that lie inside the grid.
pub fn for_each_neighbor(res: &[usize; FEATURE_DIM], flat: usize, mut f: impl FnMut(usize)) {
    let mut stride = 1;
    for a in (0..FEATURE_DIM).rev() {
        let coord = (flat / stride) % res[a];
        if coord > 0 {
            f(flat - stride);
        }
        if coord + 1 < res[a] {
            f(flat + stride);
        }
        stride *= res[a];
    }
}

/// Maximal face-connected sets of cells with `f >= theta`, ordered by their
/// lexicographically first cell.
pub fn label_components(grid: &OccupancyGrid, theta: f64) -> Vec<Component> {
    label_mask(&grid.res, &grid.f.iter().map(|&v| v >= theta).collect::<Vec<_>>())
}

/// Components of a boolean mask over a grid of shape `res`.
pub fn label_mask(res: &[usize; FEATURE_DIM], on: &[bool]) -> Vec<Component> {
    let mut seen = vec![false; on.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..on.len() {
        if !on[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut cells = Vec::new();
        while let Some(c) = queue.pop_front() {
            cells.push(c);
            for_each_neighbor(res, c, |nb| {
                if on[nb] && !seen[nb] {
                    seen[nb] = true;
                    queue.push_back(nb);
                }
            });
        }
        cells.sort_unstable();
        out.push(Component { id: out.len(), cells });
    }
    out
}
