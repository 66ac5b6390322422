//! Tile coding and a linear q over tile features.
//!
//! Each tiling is a one-hot group, so box bounds sum, per tiling, the
//! extreme weight among the tiles the box touches.

use serde::{Deserialize, Serialize};

use crate::bounds::ActionSet;
use crate::env::ObservationSpace;
use crate::error::{invalid, Result};
use crate::learned::linear::one_hot_bounds;
use crate::value::ValueFunction;
use crate::{BoundingBox, Interval};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TilingGroup {
    pub dims: Vec<usize>,
    pub num_tilings: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TileSpec {
    pub ranges: Vec<(f64, f64)>,
    pub cells: Vec<usize>,
    pub groups: Vec<TilingGroup>,
}

fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    (0u32..(1 << n))
        .filter(|m| m.count_ones() as usize == size)
        .map(|m| (0..n).filter(|i| m & (1 << i) != 0).collect())
        .collect()
}

impl TileSpec {
    /// `tilings_by_size[k]` tilings over every subset of `k + 1` dimensions.
    pub fn subset_scheme(space: &ObservationSpace, cells: Vec<usize>, tilings_by_size: &[usize]) -> Self {
        let n = space.dim();
        let mut groups = Vec::new();
        for size in (1..=n).rev() {
            let t = tilings_by_size[size - 1];
            if t == 0 {
                continue;
            }
            for dims in subsets(n, size) {
                groups.push(TilingGroup { dims, num_tilings: t });
            }
        }
        Self { ranges: space.dims.iter().map(|d| (d.lo, d.hi)).collect(), cells, groups }
    }

    /// 60 tilings over `[θ1, θ̇1, θ2, θ̇2]`; angles get 6 cells, velocities 7.
    pub fn acrobot(space: &ObservationSpace) -> Self {
        Self::subset_scheme(space, vec![6, 7, 6, 7], &[3, 4, 3, 12])
    }

    /// 140 tilings; the distractor gets 7 cells.
    pub fn distractrobot(space: &ObservationSpace) -> Self {
        Self::subset_scheme(space, vec![6, 7, 6, 7, 7], &[4, 4, 4, 4, 20])
    }

    pub fn num_tilings(&self) -> usize {
        self.groups.iter().map(|g| g.num_tilings).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.ranges.len() != self.cells.len() {
            return invalid("tile spec ranges and cells differ in length");
        }
        if self.ranges.iter().any(|(lo, hi)| !(lo < hi)) || self.cells.iter().any(|&c| c == 0) {
            return invalid("tile spec has an empty range or zero cells");
        }
        if self.groups.iter().any(|g| g.dims.is_empty() || g.dims.iter().any(|&d| d >= self.ranges.len())) {
            return invalid("tiling group references an unknown dimension");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct Tiling {
    dims: Vec<usize>,
    /// Displacement per dimension, in cell widths, in `[0, 1)`.
    offsets: Vec<f64>,
    strides: Vec<usize>,
    base: usize,
}

#[derive(Clone, Debug)]
pub struct TileCoder {
    spec: TileSpec,
    tilings: Vec<Tiling>,
    num_features: usize,
}

impl TileCoder {
    pub fn new(spec: TileSpec) -> Result<Self> {
        spec.validate()?;
        let mut tilings = Vec::new();
        let mut base = 0;
        for g in &spec.groups {
            for k in 0..g.num_tilings {
                let offsets = (0..g.dims.len())
                    .map(|j| ((k * (2 * j + 1)) as f64 / g.num_tilings as f64).fract())
                    .collect();
                let mut strides = Vec::with_capacity(g.dims.len());
                let mut size = 1;
                for &d in &g.dims {
                    strides.push(size);
                    size *= spec.cells[d] + 1;
                }
                tilings.push(Tiling { dims: g.dims.clone(), offsets, strides, base });
                base += size;
            }
        }
        Ok(Self { spec, tilings, num_features: base })
    }

    pub fn spec(&self) -> &TileSpec {
        &self.spec
    }

    pub fn num_tilings(&self) -> usize {
        self.tilings.len()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn input_dim(&self) -> usize {
        self.spec.ranges.len()
    }

    fn coord(&self, d: usize, offset: f64, x: f64) -> usize {
        let (lo, hi) = self.spec.ranges[d];
        let c = self.spec.cells[d];
        let u = (x.clamp(lo, hi) - lo) / (hi - lo) * c as f64 + offset;
        (u.floor() as usize).min(c)
    }

    /// Active tile index for each tiling, in tiling order.
    pub fn active_tiles(&self, obs: &[f64], out: &mut Vec<usize>) {
        out.clear();
        for t in &self.tilings {
            let mut idx = t.base;
            for (j, &d) in t.dims.iter().enumerate() {
                idx += self.coord(d, t.offsets[j], obs[d]) * t.strides[j];
            }
            out.push(idx);
        }
    }

    pub fn tile_features(&self, obs: &[f64]) -> Vec<usize> {
        let mut v = Vec::with_capacity(self.tilings.len());
        self.active_tiles(obs, &mut v);
        v
    }

    /// Calls `f` with the index of every tile of `tiling` that the box touches.
    fn for_each_touched(&self, tiling: usize, b: &BoundingBox, mut f: impl FnMut(usize)) {
        let t = &self.tilings[tiling];
        let ranges: Vec<(usize, usize)> = t
            .dims
            .iter()
            .enumerate()
            .map(|(j, &d)| (self.coord(d, t.offsets[j], b.lower()[d]), self.coord(d, t.offsets[j], b.upper()[d])))
            .collect();
        let mut cursor: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        loop {
            let idx = t.base + cursor.iter().zip(&t.strides).map(|(c, s)| c * s).sum::<usize>();
            f(idx);
            let mut j = 0;
            loop {
                if j == cursor.len() {
                    return;
                }
                if cursor[j] < ranges[j].1 {
                    cursor[j] += 1;
                    break;
                }
                cursor[j] = ranges[j].0;
                j += 1;
            }
        }
    }
}

/// Linear q over tile features, one weight vector per action.
#[derive(Clone, Debug)]
pub struct TileCodedQ {
    coder: TileCoder,
    num_actions: usize,
    weights: Vec<f64>,
    scratch: Vec<usize>,
}

impl TileCodedQ {
    pub fn new(coder: TileCoder, num_actions: usize) -> Self {
        let weights = vec![0.0; coder.num_features() * num_actions];
        Self { coder, num_actions, weights, scratch: Vec::new() }
    }

    pub fn coder(&self) -> &TileCoder {
        &self.coder
    }

    fn w(&self, feature: usize, a: usize) -> f64 {
        self.weights[a * self.coder.num_features + feature]
    }

    /// Mutable weights of one tiling for one action.
    pub fn tiling_weights_mut(&mut self, tiling: usize, a: usize) -> &mut [f64] {
        let start = self.coder.tilings[tiling].base;
        let end = self.coder.tilings.get(tiling + 1).map_or(self.coder.num_features, |t| t.base);
        let off = a * self.coder.num_features;
        &mut self.weights[off + start..off + end]
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }
}

impl ValueFunction for TileCodedQ {
    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn q(&self, s: &[f64], a: usize) -> f64 {
        let off = a * self.coder.num_features;
        let mut sum = 0.0;
        for t in &self.coder.tilings {
            let mut idx = t.base;
            for (j, &d) in t.dims.iter().enumerate() {
                idx += self.coder.coord(d, t.offsets[j], s[d]) * t.strides[j];
            }
            sum += self.weights[off + idx];
        }
        sum
    }

    /// Per-weight step is `alpha / num_tilings`.
    fn update(&mut self, s: &[f64], a: usize, target: f64, alpha: f64) {
        let mut tiles = std::mem::take(&mut self.scratch);
        self.coder.active_tiles(s, &mut tiles);
        let off = a * self.coder.num_features;
        let current: f64 = tiles.iter().map(|&i| self.weights[off + i]).sum();
        let step = alpha / tiles.len() as f64 * (target - current);
        for &i in &tiles {
            self.weights[off + i] += step;
        }
        self.scratch = tiles;
    }

    fn q_bounds(&self, b: &BoundingBox, actions: &ActionSet) -> Result<Interval> {
        if b.dim() != self.coder.input_dim() {
            return invalid(format!("box has dimension {} but the tile coder expects {}", b.dim(), self.coder.input_dim()));
        }
        if actions.max() >= self.num_actions {
            return invalid("action out of range");
        }
        let mut lo = 0.0;
        let mut hi = 0.0;
        for t in 0..self.coder.tilings.len() {
            let mut candidates = Vec::new();
            self.coder.for_each_touched(t, b, |idx| candidates.extend(actions.iter().map(|a| self.w(idx, a))));
            let g = one_hot_bounds(&candidates);
            lo += g.lo();
            hi += g.hi();
        }
        Ok(Interval::spanning(lo, hi))
    }
}
