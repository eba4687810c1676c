//! The diffusion-threshold operator `H(t)` on graphs and its iterates.
//!
//! The heat flow on `𝔾×ℝ` of the subgraph indicator of `f` factorises along
//! the vertical line: at height `λ` it equals `V(x, λ) = [e^{tΔ}Φ_t(f − λ)](x)`,
//! `Φ_t` the vertical heat CDF. `V` is strictly decreasing in `λ`, and
//! `H(t)f(x)` is the unique `λ` with `V(x, λ) = ½`.
//!
//! `V` is sampled at Chebyshev–Lobatto levels. Since the heat flow is linear,
//! interpolating in `λ` commutes with it, and `λ ↦ Φ_t(s − λ)` is entire, so
//! the barycentric interpolant converges spectrally in the number of levels.

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::heat::{vertical_cdf, HeatOperator, HeatOperatorSpec};
use crate::par;

/// Vertical padding of the level range, in units of `√t`.
pub const LEVEL_PAD: f64 = 6.0;

#[derive(Clone, Debug, PartialEq)]
pub enum LevelGrid {
    /// `k` Chebyshev–Lobatto points on `[lo, hi]`.
    Chebyshev { lo: f64, hi: f64, k: usize },
    /// Arbitrary strictly increasing levels, interpolated by monotone cubics.
    Explicit(Vec<f64>),
}

impl LevelGrid {
    pub fn uniform(lo: f64, hi: f64, k: usize) -> Self {
        let step = (hi - lo) / (k - 1) as f64;
        LevelGrid::Explicit((0..k).map(|i| lo + i as f64 * step).collect())
    }

    /// Levels covering `[min f − 6√t, max f + 6√t]`, with enough nodes for
    /// the interpolant to resolve the vertical profile of width `√t`.
    pub fn auto(f: &GridFunction, t: f64, cfg: &SolverConfig) -> Self {
        let st = t.sqrt();
        let (lo, hi) = (f.min() - LEVEL_PAD * st, f.max() + LEVEL_PAD * st);
        let k = cfg.levels.max((2.0 * f.oscillation() / st).ceil() as usize + 32);
        LevelGrid::Chebyshev { lo, hi, k }
    }

    pub fn levels(&self) -> Vec<f64> {
        match self {
            LevelGrid::Chebyshev { lo, hi, k } => {
                let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                let n = (*k - 1) as f64;
                (0..*k)
                    .map(|j| c - r * (std::f64::consts::PI * j as f64 / n).cos())
                    .collect()
            }
            LevelGrid::Explicit(v) => v.clone(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            LevelGrid::Chebyshev { k, .. } => *k,
            LevelGrid::Explicit(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
enum Interpolant {
    Barycentric(Vec<f64>),
    Pchip,
}

/// `V(x, λ_k)` for all nodes `x` and levels `λ_k`.
#[derive(Clone, Debug)]
pub struct LevelStack {
    pub grid: Grid,
    pub t: f64,
    pub levels: Vec<f64>,
    /// Level-major: `slices[k][x]`.
    pub slices: Vec<Vec<f64>>,
    interp: Interpolant,
}

pub fn build_level_stack(
    f: &GridFunction,
    t: f64,
    levels: &LevelGrid,
    cfg: &SolverConfig,
) -> Result<LevelStack> {
    cfg.validate()?;
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("time must be positive, got {t}")));
    }
    let lv = levels.levels();
    if lv.len() < 2 || lv.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(
            "levels must be strictly increasing, at least two".into(),
        ));
    }
    f.check_finite()?;
    let op = HeatOperator::new(&f.grid, &HeatOperatorSpec::new(cfg.eps, cfg.cfl_safety)?)?;
    let slices = par::map_range(lv.len(), |k| {
        let init: Vec<f64> = f.values.iter().map(|&v| vertical_cdf(t, v - lv[k])).collect();
        op.evolve_values(init, t)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let interp = match levels {
        LevelGrid::Chebyshev { k, .. } => Interpolant::Barycentric(
            (0..*k)
                .map(|j| {
                    let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                    if j == 0 || j == k - 1 {
                        0.5 * s
                    } else {
                        s
                    }
                })
                .collect(),
        ),
        LevelGrid::Explicit(_) => Interpolant::Pchip,
    };
    let stack = LevelStack {
        grid: f.grid.clone(),
        t,
        levels: lv,
        slices,
        interp,
    };
    let last = stack.levels.len() - 1;
    for i in 0..stack.grid.len() {
        let (first, lastv) = (stack.slices[0][i], stack.slices[last][i]);
        if first < 0.5 || lastv > 0.5 {
            return Err(Error::Bracket {
                index: i,
                first,
                last: lastv,
            });
        }
    }
    Ok(stack)
}

impl LevelStack {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Column `V(x, λ_k)` over `k`.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.slices.iter().map(|s| s[i]).collect()
    }

    /// `V(x, λ)` at node `i`, interpolated in `λ`.
    pub fn value(&self, i: usize, lambda: f64) -> f64 {
        let col = self.column(i);
        self.eval(&col, lambda, None)
    }

    fn eval(&self, col: &[f64], lambda: f64, slopes: Option<&[f64]>) -> f64 {
        match &self.interp {
            Interpolant::Barycentric(w) => barycentric(&self.levels, w, col, lambda),
            Interpolant::Pchip => {
                let owned;
                let d = match slopes {
                    Some(d) => d,
                    None => {
                        owned = pchip_slopes(&self.levels, col);
                        &owned
                    }
                };
                hermite(&self.levels, col, d, lambda)
            }
        }
    }
}

fn barycentric(x: &[f64], w: &[f64], y: &[f64], at: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..x.len() {
        let d = at - x[j];
        if d == 0.0 {
            return y[j];
        }
        let c = w[j] / d;
        num += c * y[j];
        den += c;
    }
    num / den
}

/// Fritsch–Carlson slopes: the Hermite cubic is monotone wherever the data are.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    let mut d = vec![0.0; n];
    if n == 2 {
        return vec![delta[0]; 2];
    }
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s * d0 <= 0.0 {
            0.0
        } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    d[0] = end(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn hermite(x: &[f64], y: &[f64], d: &[f64], at: f64) -> f64 {
    let n = x.len();
    let k = match x.partition_point(|&v| v <= at) {
        0 => 0,
        p => (p - 1).min(n - 2),
    };
    let h = x[k + 1] - x[k];
    let s = (at - x[k]) / h;
    let (s2, s3) = (s * s, s * s * s);
    (2.0 * s3 - 3.0 * s2 + 1.0) * y[k]
        + (s3 - 2.0 * s2 + s) * h * d[k]
        + (-2.0 * s3 + 3.0 * s2) * y[k + 1]
        + (s3 - s2) * h * d[k + 1]
}

/// Root of a decreasing function on `[a, b]` with `f(a) ≥ 0 ≥ f(b)`:
/// Illinois regula falsi, bisection when it stalls.
fn decreasing_root(mut a: f64, mut b: f64, mut fa: f64, mut fb: f64, f: impl Fn(f64) -> f64) -> f64 {
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    let mut side = 0i8;
    for it in 0..200 {
        let width = b - a;
        if width <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1e-300) {
            break;
        }
        let mut c = if it % 8 == 7 {
            0.5 * (a + b)
        } else {
            (a * fb - b * fa) / (fb - fa)
        };
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let fc = f(c);
        if fc == 0.0 {
            return c;
        }
        if fc > 0.0 {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        } else {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        }
    }
    if fa.abs() < fb.abs() {
        a
    } else {
        b
    }
}

/// `g(x)` with `V(x, g(x)) = ½` at every node.
pub fn threshold(stack: &LevelStack) -> Result<GridFunction> {
    let n = stack.grid.len();
    let roots = par::map_range(n, |i| {
        let col = stack.column(i);
        let slopes = matches!(stack.interp, Interpolant::Pchip).then(|| pchip_slopes(&stack.levels, &col));
        let last = col.len() - 1;
        if col[0] < 0.5 || col[last] > 0.5 {
            return Err(Error::Bracket {
                index: i,
                first: col[0],
                last: col[last],
            });
        }
        // last node still at or above ½
        let k = col.partition_point(|&v| v >= 0.5).clamp(1, last) - 1;
        let (a, b) = (stack.levels[k], stack.levels[k + 1]);
        let g = |l: f64| stack.eval(&col, l, slopes.as_deref()) - 0.5;
        Ok(decreasing_root(a, b, col[k] - 0.5, col[k + 1] - 0.5, g))
    });
    let values = roots.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(GridFunction {
        grid: stack.grid.clone(),
        values,
    })
}

/// Largest `|V(x, g(x)) − ½|` over the grid.
pub fn threshold_residual(stack: &LevelStack, g: &GridFunction) -> f64 {
    (0..g.values.len())
        .map(|i| (stack.value(i, g.values[i]) - 0.5).abs())
        .fold(0.0, f64::max)
}

pub fn h_apply_with_levels(f: &GridFunction, t: f64, levels: &LevelGrid, cfg: &SolverConfig) -> Result<GridFunction> {
    threshold(&build_level_stack(f, t, levels, cfg)?)
}

/// `H(t)f`.
pub fn h_apply(f: &GridFunction, t: f64, cfg: &SolverConfig) -> Result<GridFunction> {
    h_apply_with_levels(f, t, &LevelGrid::auto(f, t, cfg), cfg)
}

#[derive(Clone, Debug)]
pub struct MboFlow {
    pub result: GridFunction,
    /// `‖u_{k+1} − u_k‖_∞` per iterate.
    pub increments: Vec<f64>,
    /// Iterates `u_1 … u_j` when requested.
    pub trajectory: Vec<GridFunction>,
    /// Diffusion length of one step below two grid spacings.
    pub pinned: bool,
}

/// `H(t/j)ʲ f`.
pub fn mbo_flow(f: &GridFunction, t: f64, j: usize, cfg: &SolverConfig, keep_trajectory: bool) -> Result<MboFlow> {
    if j == 0 || !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("need t > 0 and j ≥ 1, got t = {t}, j = {j}")));
    }
    let tau = t / j as f64;
    let h = f.grid.horizontal_spacing();
    let pinned = 2.0 * tau.sqrt() < 2.0 * h;
    if pinned {
        log::warn!(
            "threshold step t/j = {tau:.3e} has diffusion length {:.3e} below 2h = {:.3e}; the interface may pin",
            2.0 * tau.sqrt(),
            2.0 * h
        );
    }
    let mut u = f.clone();
    let mut increments = Vec::with_capacity(j);
    let mut trajectory = Vec::new();
    for _ in 0..j {
        let next = h_apply(&u, tau, cfg)?;
        increments.push(next.sup_diff(&u));
        u = next;
        if keep_trajectory {
            trajectory.push(u.clone());
        }
    }
    Ok(MboFlow {
        result: u,
        increments,
        trajectory,
        pinned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Axis, Boundary};
    use statrs::function::erf::{erf, erfc};

    fn line(n: usize) -> Grid {
        Grid::euclidean1(Axis::new(-1.0, 2.0, n), Boundary::Torus).unwrap()
    }

    #[test]
    fn constant_slices() {
        let g = line(32);
        let f = GridFunction::constant(&g, 0.0);
        let t: f64 = 0.01;
        let cfg = SolverConfig::default();
        let lv = LevelGrid::Explicit(vec![-1.0, 0.0, 2.0 * t.sqrt(), 4.0 * t.sqrt(), 1.0]);
        let st = build_level_stack(&f, t, &lv, &cfg).unwrap();
        assert!(st.slices[1].iter().all(|&v| (v - 0.5).abs() < 1e-15));
        let expect = 0.5 * (1.0 - erf(1.0));
        assert!((expect - 0.0786).abs() < 1e-4);
        let worst = st.slices[2].iter().fold(0.0f64, |m, &v| m.max((v - expect).abs()));
        assert!(worst < 1e-14, "{worst}");
        let far = 0.5 * erfc(2.0);
        assert!(st.slices[3].iter().all(|&v| (v - far).abs() < 1e-15));
    }

    #[test]
    fn constant_is_fixed_point() {
        let g = line(32);
        let f = GridFunction::constant(&g, 0.7);
        let cfg = SolverConfig::default();
        let out = h_apply(&f, 0.01, &cfg).unwrap();
        assert!(out.values.iter().all(|&v| (v - 0.7).abs() < 1e-12));
        let flow = mbo_flow(&f, 0.02, 3, &cfg, true).unwrap();
        assert_eq!(flow.trajectory.len(), 3);
        assert!(flow.result.values.iter().all(|&v| (v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn narrow_levels_are_rejected() {
        let g = line(32);
        let f = GridFunction::from_fn(&g, |p| p[0]);
        let cfg = SolverConfig::default();
        let lv = LevelGrid::uniform(-0.2, 0.2, 9);
        assert!(matches!(build_level_stack(&f, 0.01, &lv, &cfg), Err(Error::Bracket { .. })));
    }

    #[test]
    fn pchip_and_chebyshev_agree() {
        let g = line(64);
        let f = GridFunction::from_fn(&g, |p| 0.2 * (std::f64::consts::PI * p[0]).sin());
        let cfg = SolverConfig::default();
        let t = 0.01;
        let cheb = h_apply(&f, t, &cfg).unwrap();
        let uni = h_apply_with_levels(&f, t, &LevelGrid::uniform(-0.8, 0.8, 161), &cfg).unwrap();
        assert!(cheb.sup_diff(&uni) < 1e-4, "{}", cheb.sup_diff(&uni));
    }

    #[test]
    fn residual_within_tolerance() {
        let g = line(64);
        let f = GridFunction::from_fn(&g, |p| 0.3 * (std::f64::consts::PI * p[0]).cos());
        let cfg = SolverConfig::default();
        let t = 0.005;
        let st = build_level_stack(&f, t, &LevelGrid::auto(&f, t, &cfg), &cfg).unwrap();
        let gth = threshold(&st).unwrap();
        assert!(threshold_residual(&st, &gth) <= cfg.root_tol);
        for k in 1..st.len() {
            // up to rounding of values that have saturated at 0 or 1
            assert!(st.slices[k].iter().zip(&st.slices[k - 1]).all(|(a, b)| a < b || a - b < 1e-15));
        }
    }

    #[test]
    fn pchip_is_monotone_on_monotone_data() {
        let x = [0.0, 0.5, 1.0, 3.0, 3.2];
        let y = [1.0, 0.9, 0.2, 0.19, 0.0];
        let d = pchip_slopes(&x, &y);
        let mut prev = f64::INFINITY;
        for i in 0..=320 {
            let v = hermite(&x, &y, &d, i as f64 * 0.01);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }
}
