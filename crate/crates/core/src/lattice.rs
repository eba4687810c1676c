//! Compiling vector fields into exact lattice moves.
//!
//! A move by `s` along a left-invariant field `X` sends `p` to `p·exp(sX)`. For
//! the built-in fields the flow lines are straight, so the target is
//! `p + s·c(p)` with `c` the coefficient vector. On a grid whose spacings are
//! matched to the group law (for ℍ¹: equal horizontal spacing `h`, origin on
//! the `h`-lattice and vertical spacing `h²/(2q)`), every such target is again
//! a node. The move therefore needs no interpolation: per row it is a target
//! row plus an integer shift along the row.

use crate::error::{Error, Result};
use crate::grid::{Boundary, Grid};
use crate::group::VectorField;
use crate::par;

/// Node map `p ↦ p·exp(sX)`. A target outside the box along the contiguous
/// axis is clamped to the face; a target row outside the box maps to itself.
#[derive(Clone, Debug)]
pub struct Move {
    /// Target row for each row; `None` if the move leaves the box.
    rows: Vec<Option<usize>>,
    /// Shift along the row, per row.
    shifts: Vec<isize>,
    wrap: bool,
}

/// A field compiled at step `step`: forward and backward moves.
#[derive(Clone, Debug)]
pub struct FieldMoves {
    pub plus: Move,
    pub minus: Move,
    pub step: f64,
}

const INTEGER_TOL: f64 = 1e-7;

impl Move {
    pub fn compile(grid: &Grid, field: &VectorField, step: f64) -> Result<Self> {
        if field.dim() != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: grid.dim(),
                found: field.dim(),
            });
        }
        if !field.has_straight_flow() {
            return Err(Error::Lattice("field flow lines are not straight".into()));
        }
        let last = grid.dim() - 1;
        if field.coeffs.iter().any(|c| c.depends_on(last)) {
            return Err(Error::Lattice(
                "field coefficients may not depend on the contiguous axis".into(),
            ));
        }
        let shape = grid.shape3();
        let wrap = grid.boundary == Boundary::Torus;
        let rows = shape[0] * shape[1];
        let mut targets = Vec::with_capacity(rows);
        let mut shifts = Vec::with_capacity(rows);
        for r in 0..rows {
            let row_idx = [r / shape[1], r % shape[1]];
            // group coordinates of the row (contiguous axis at its origin)
            let mut p = vec![0.0; grid.dim()];
            let mut gidx = vec![0usize; grid.dim()];
            for (k, pk) in p.iter_mut().enumerate() {
                let ia = grid.internal_axis(k);
                gidx[k] = if ia < 2 { row_idx[ia] } else { 0 };
                *pk = grid.axes[k].coord(gidx[k]);
            }
            let c = field.eval_coeffs(&p);
            let mut disp = [0isize; 3];
            for k in 0..grid.dim() {
                let d = step * c[k] / grid.spacing(k);
                let di = d.round();
                if (d - di).abs() > INTEGER_TOL {
                    return Err(Error::Lattice(format!(
                        "step {step} moves axis {k} by {d} cells at {p:?}"
                    )));
                }
                disp[grid.internal_axis(k)] = di as isize;
            }
            let mut t = [row_idx[0] as isize + disp[0], row_idx[1] as isize + disp[1]];
            let mut inside = true;
            for ax in 0..2 {
                let n = shape[ax] as isize;
                if wrap {
                    t[ax] = t[ax].rem_euclid(n);
                } else if t[ax] < 0 || t[ax] >= n {
                    inside = false;
                }
            }
            targets.push(inside.then(|| t[0] as usize * shape[1] + t[1] as usize));
            shifts.push(disp[2]);
        }
        Ok(Self {
            rows: targets,
            shifts,
            wrap,
        })
    }

    /// `out[i] += coef · u[T(i)]` for every node `i` of row `r`.
    #[inline]
    pub(crate) fn accumulate_row(&self, r: usize, len: usize, u: &[f64], coef: f64, out: &mut [f64]) {
        let own = &u[r * len..(r + 1) * len];
        let Some(t) = self.rows[r] else {
            for (o, &v) in out.iter_mut().zip(own) {
                *o += coef * v;
            }
            return;
        };
        let src = &u[t * len..(t + 1) * len];
        let s = self.shifts[r];
        if self.wrap {
            let s = s.rem_euclid(len as isize) as usize;
            let (head, tail) = out.split_at_mut(len - s);
            for (o, &v) in head.iter_mut().zip(&src[s..]) {
                *o += coef * v;
            }
            for (o, &v) in tail.iter_mut().zip(&src[..s]) {
                *o += coef * v;
            }
            return;
        }
        // clamp i + s to the row: values beyond the face equal the face value
        let lo = (-s).clamp(0, len as isize) as usize;
        let hi = (len as isize - s).clamp(lo as isize, len as isize) as usize;
        let (first, last) = (src[0], src[len - 1]);
        for o in &mut out[..lo] {
            *o += coef * first;
        }
        let s0 = (lo as isize + s).max(0) as usize;
        for (o, &v) in out[lo..hi].iter_mut().zip(&src[s0.min(len)..]) {
            *o += coef * v;
        }
        for o in &mut out[hi..] {
            *o += coef * last;
        }
    }

    /// The translated field `i ↦ u[T(i)]`.
    pub fn apply(&self, grid: &Grid, u: &[f64]) -> Vec<f64> {
        let len = grid.row_len();
        let mut out = vec![0.0; u.len()];
        par::for_each_chunk(&mut out, len, |r, row| self.accumulate_row(r, len, u, 1.0, row));
        out
    }

    /// Whether node `flat` is moved to a node of the box (rather than being
    /// clamped or falling back to itself).
    pub fn stays_inside(&self, len: usize, flat: usize) -> bool {
        let r = flat / len;
        let i = (flat % len) as isize;
        match self.rows[r] {
            None => false,
            Some(_) => self.wrap || (0..len as isize).contains(&(i + self.shifts[r])),
        }
    }
}

impl FieldMoves {
    pub fn compile(grid: &Grid, field: &VectorField, step: f64) -> Result<Self> {
        Ok(Self {
            plus: Move::compile(grid, field, step)?,
            minus: Move::compile(grid, field, -step)?,
            step,
        })
    }
}

/// Step used for the vertical field of ℍ¹: the multiple of the vertical
/// spacing closest to the horizontal spacing.
pub(crate) fn vertical_step(grid: &Grid) -> f64 {
    let hz = grid.spacing(grid.dim() - 1);
    let m = (grid.horizontal_spacing() / hz).round().max(1.0);
    m * hz
}

/// Moves for the horizontal frame at one grid spacing each.
pub fn horizontal_moves(grid: &Grid) -> Result<Vec<FieldMoves>> {
    grid.group
        .horizontal_fields()
        .iter()
        .enumerate()
        .map(|(k, f)| FieldMoves::compile(grid, f, grid.spacing(k)))
        .collect()
}

/// Moves for the higher-layer fields.
pub fn higher_moves(grid: &Grid) -> Result<Vec<FieldMoves>> {
    grid.group
        .higher_fields()
        .iter()
        .map(|f| FieldMoves::compile(grid, f, vertical_step(grid)))
        .collect()
}
