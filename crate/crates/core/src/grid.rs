//! Regular boxes over group coordinates and the scalar fields sampled on them.
//!
//! Internally every grid is viewed as a three-axis array `[A, B, C]` with the
//! last axis contiguous ("rows"): ℝ¹ is `[1, 1, Nx]`, ℝ² is `[1, Nx, Ny]` and
//! ℍ¹ is `[Nx, Ny, Nz]`.

use crate::error::{Error, Result};
use crate::group::{GroupDescriptor, GroupKind};
use crate::par::pairwise_sum;

/// One coordinate axis: nodes `origin + i·h` for `i < count`, `h = extent / count`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub origin: f64,
    pub extent: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(origin: f64, extent: f64, count: usize) -> Self {
        Self {
            origin,
            extent,
            count,
        }
    }

    /// Axis with `count` nodes spaced `h` apart, symmetric about 0.
    pub fn centered(h: f64, count: usize) -> Self {
        let origin = -(count as f64 - 1.0) * 0.5 * h;
        Self::new(origin, h * count as f64, count)
    }

    pub fn spacing(&self) -> f64 {
        self.extent / self.count as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.spacing()
    }

    /// Last node.
    pub fn end(&self) -> f64 {
        self.coord(self.count - 1)
    }

    /// Index of the node nearest to `x` (clamped).
    pub fn nearest(&self, x: f64) -> usize {
        let k = ((x - self.origin) / self.spacing()).round();
        k.clamp(0.0, (self.count - 1) as f64) as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Boundary {
    /// Periodic in every axis; only for groups with constant field coefficients.
    Torus,
    /// A reach past a face along the contiguous axis reads the face value; one
    /// leaving the box along another axis reads the current node.
    ExtendConstant,
}

impl std::str::FromStr for Boundary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "torus" => Ok(Boundary::Torus),
            "extend_constant" => Ok(Boundary::ExtendConstant),
            other => Err(Error::InvalidArgument(format!("unknown boundary '{other}'"))),
        }
    }
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Boundary::Torus => "torus",
            Boundary::ExtendConstant => "extend_constant",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub group: GroupDescriptor,
    pub axes: Vec<Axis>,
    pub boundary: Boundary,
}

impl Grid {
    pub fn new(group: GroupDescriptor, axes: Vec<Axis>, boundary: Boundary) -> Result<Self> {
        if axes.len() != group.n {
            return Err(Error::DimensionMismatch {
                expected: group.n,
                found: axes.len(),
            });
        }
        for (k, a) in axes.iter().enumerate() {
            if a.count < 2 || !(a.extent > 0.0) || !a.extent.is_finite() || !a.origin.is_finite()
            {
                return Err(Error::InvalidArgument(format!(
                    "degenerate axis {k}: origin {}, extent {}, count {}",
                    a.origin, a.extent, a.count
                )));
            }
        }
        if boundary == Boundary::Torus && group.kind == GroupKind::Heisenberg1 {
            return Err(Error::InvalidArgument(
                "heisenberg1 grids require the extend_constant boundary".into(),
            ));
        }
        Ok(Self {
            group,
            axes,
            boundary,
        })
    }

    pub fn euclidean1(axis: Axis, boundary: Boundary) -> Result<Self> {
        Self::new(GroupDescriptor::euclidean(1)?, vec![axis], boundary)
    }

    pub fn euclidean2(ax: Axis, ay: Axis, boundary: Boundary) -> Result<Self> {
        Self::new(GroupDescriptor::euclidean(2)?, vec![ax, ay], boundary)
    }

    /// ℍ¹ lattice grid: `2·half+1` horizontal nodes per axis at spacing `h`
    /// (centred on 0), vertical spacing `h²/(2q)` and `nz` vertical nodes
    /// centred on 0 (rounded up to an odd count so that 0 is a node).
    pub fn heisenberg(h: f64, half: usize, q: usize, nz: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidArgument("lattice ratio q must be ≥ 1".into()));
        }
        let n = 2 * half + 1;
        let hz = h * h / (2.0 * q as f64);
        let nz = nz | 1;
        Self::new(
            GroupDescriptor::heisenberg1(),
            vec![Axis::centered(h, n), Axis::centered(h, n), Axis::centered(hz, nz)],
            Boundary::ExtendConstant,
        )
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn counts(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.count).collect()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.axes[axis].spacing()
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).product()
    }

    /// Smallest spacing among horizontal axes.
    pub fn horizontal_spacing(&self) -> f64 {
        (0..self.group.m)
            .map(|k| self.spacing(k))
            .fold(f64::INFINITY, f64::min)
    }

    /// The padded three-axis shape.
    pub fn shape3(&self) -> [usize; 3] {
        let mut s = [1usize; 3];
        let off = 3 - self.dim();
        for (k, a) in self.axes.iter().enumerate() {
            s[off + k] = a.count;
        }
        s
    }

    /// Padded axis position of group axis `k`.
    pub(crate) fn internal_axis(&self, k: usize) -> usize {
        3 - self.dim() + k
    }

    pub fn row_len(&self) -> usize {
        self.shape3()[2]
    }

    pub fn rows(&self) -> usize {
        let s = self.shape3();
        s[0] * s[1]
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, a)| acc * a.count + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            let c = self.axes[k].count;
            idx[k] = flat % c;
            flat /= c;
        }
        idx
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| a.coord(i))
            .collect()
    }

    pub fn point_of(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .zip(&self.axes)
            .map(|(&i, a)| a.coord(i))
            .collect()
    }

    /// Flat index of the node nearest to `p`.
    pub fn nearest(&self, p: &[f64]) -> usize {
        let idx: Vec<usize> = p.iter().zip(&self.axes).map(|(&x, a)| a.nearest(x)).collect();
        self.flat_index(&idx)
    }

    /// Largest distance from `p` to the box faces along each axis, taking the
    /// nearer face; `+∞` for periodic axes.
    pub(crate) fn face_distances(&self, p: &[f64]) -> Vec<f64> {
        self.axes
            .iter()
            .zip(p)
            .map(|(a, &x)| match self.boundary {
                Boundary::Torus => 0.5 * a.extent,
                Boundary::ExtendConstant => (x - a.origin).min(a.end() - x),
            })
            .collect()
    }
}

/// A scalar field sampled on a [`Grid`], values in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        let gf = Self { grid, values };
        gf.check_finite()?;
        Ok(gf)
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self {
            values: vec![c; grid.len()],
            grid: grid.clone(),
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    /// Same grid, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.values.len(), other.values.len());
        self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFinite { index }),
            None => Ok(()),
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn oscillation(&self) -> f64 {
        self.max() - self.min()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `Σ values · cell volume`, pairwise summed.
    pub fn mass(&self) -> f64 {
        pairwise_sum(&self.values) * self.grid.cell_volume()
    }

    pub fn sup_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// An axis-aligned block of grid indices on which metrics are evaluated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Window {
    /// Half-open index range per group axis.
    pub ranges: Vec<(usize, usize)>,
}

impl Window {
    pub fn full(grid: &Grid) -> Self {
        Self {
            ranges: grid.axes.iter().map(|a| (0, a.count)).collect(),
        }
    }

    /// Nodes whose coordinates lie in the given closed boxes per axis.
    pub fn from_bounds(grid: &Grid, bounds: &[(f64, f64)]) -> Result<Self> {
        if bounds.len() != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: grid.dim(),
                found: bounds.len(),
            });
        }
        let mut ranges = Vec::with_capacity(bounds.len());
        for (a, &(lo, hi)) in grid.axes.iter().zip(bounds) {
            let h = a.spacing();
            let tol = 1e-9 * h;
            let i0 = ((lo - a.origin - tol) / h).ceil().max(0.0) as usize;
            let i1 = (((hi - a.origin + tol) / h).floor() + 1.0).clamp(0.0, a.count as f64) as usize;
            if i0 >= i1 {
                return Err(Error::InvalidArgument(format!(
                    "empty window [{lo}, {hi}] on an axis spanning [{}, {}]",
                    a.origin,
                    a.end()
                )));
            }
            ranges.push((i0, i1));
        }
        Ok(Self { ranges })
    }

    /// Nodes at distance at least `r` from the box along horizontal axes. On
    /// ℍ¹ the vertical margin is `r² + R·r`, `R` the largest horizontal
    /// coordinate kept, which bounds how far a horizontal excursion of length
    /// `r` moves the vertical coordinate. Periodic boxes have no boundary.
    pub fn interior(grid: &Grid, r: f64) -> Result<Self> {
        Self::interior_impl(grid, r, true)
    }

    /// Interior in the horizontal axes only; vertical axis kept whole.
    pub fn interior_horizontal(grid: &Grid, r: f64) -> Result<Self> {
        Self::interior_impl(grid, r, false)
    }

    fn interior_impl(grid: &Grid, r: f64, vertical: bool) -> Result<Self> {
        if grid.boundary == Boundary::Torus {
            return Ok(Self::full(grid));
        }
        let m = grid.group.m;
        let mut bounds: Vec<(f64, f64)> = grid.axes[..m]
            .iter()
            .map(|a| (a.origin + r, a.end() - r))
            .collect();
        if grid.group.kind == GroupKind::Heisenberg1 {
            let big_r = bounds
                .iter()
                .map(|&(lo, hi)| lo.abs().max(hi.abs()))
                .fold(0.0f64, |acc, v| acc.hypot(v));
            let a = grid.axes[2];
            let rz = if vertical { r * r + big_r * r } else { 0.0 };
            bounds.push((a.origin + rz, a.end() - rz));
        }
        Self::from_bounds(grid, &bounds)
    }

    pub fn len(&self) -> usize {
        self.ranges.iter().map(|(a, b)| b - a).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, grid: &Grid, flat: usize) -> bool {
        grid.multi_index(flat)
            .iter()
            .zip(&self.ranges)
            .all(|(&i, &(a, b))| i >= a && i < b)
    }

    /// Flat indices of the window, in increasing order.
    pub fn indices(&self, grid: &Grid) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        let mut idx: Vec<usize> = self.ranges.iter().map(|r| r.0).collect();
        if self.is_empty() {
            return out;
        }
        loop {
            out.push(grid.flat_index(&idx));
            let mut k = idx.len();
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < self.ranges[k].1 {
                    break;
                }
                idx[k] = self.ranges[k].0;
            }
        }
    }

    pub fn mask(&self, grid: &Grid) -> Vec<bool> {
        let mut m = vec![false; grid.len()];
        for i in self.indices(grid) {
            m[i] = true;
        }
        m
    }

    pub fn sup_abs(&self, grid: &Grid, v: &[f64]) -> f64 {
        self.indices(grid)
            .into_iter()
            .fold(0.0, |m, i| m.max(v[i].abs()))
    }

    pub fn sup_diff(&self, a: &GridFunction, b: &GridFunction) -> f64 {
        self.indices(&a.grid)
            .into_iter()
            .fold(0.0, |m, i| m.max((a.values[i] - b.values[i]).abs()))
    }
}
