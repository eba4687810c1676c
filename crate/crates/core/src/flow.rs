//! Horizontal mean curvature of graphs and the curvature-flow operator
//!
//! `Au = −Σᵢⱼ (δᵢⱼ − XᵢuXⱼu/(1+|∇₀u|²)) XᵢXⱼu`,
//!
//! so that graphs move by `∂ₜu = −Au`. With the leading minus in
//! `h₀ = −(1+|∇₀u|²)^{-1/2} Σ aᵢⱼ XᵢXⱼu` the two are tied by
//! `Au = h₀·√(1+|∇₀u|²)`.
//!
//! Derivatives use the same exact lattice moves as the heat flow:
//! `Dᵢu = (u(p·e^{hXᵢ}) − u(p·e^{−hXᵢ}))/2h`, the compact second difference for
//! `Xᵢ²` and `DᵢDⱼ` for mixed terms (both orders kept).

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction, Window};
use crate::lattice::{higher_moves, horizontal_moves, FieldMoves};

struct Stencil {
    grid: Grid,
    fields: Vec<FieldMoves>,
}

impl Stencil {
    fn horizontal(grid: &Grid) -> Result<Self> {
        Ok(Self {
            grid: grid.clone(),
            fields: horizontal_moves(grid)?,
        })
    }

    /// Horizontal fields followed by the higher-layer ones.
    fn full(grid: &Grid) -> Result<Self> {
        let mut fields = horizontal_moves(grid)?;
        fields.extend(higher_moves(grid)?);
        Ok(Self {
            grid: grid.clone(),
            fields,
        })
    }

    fn d1(&self, i: usize, u: &[f64]) -> Vec<f64> {
        let fm = &self.fields[i];
        let p = fm.plus.apply(&self.grid, u);
        let m = fm.minus.apply(&self.grid, u);
        let s = 0.5 / fm.step;
        p.iter().zip(&m).map(|(a, b)| (a - b) * s).collect()
    }

    fn d2(&self, i: usize, u: &[f64]) -> Vec<f64> {
        let fm = &self.fields[i];
        let p = fm.plus.apply(&self.grid, u);
        let m = fm.minus.apply(&self.grid, u);
        let s = 1.0 / (fm.step * fm.step);
        p.iter()
            .zip(&m)
            .zip(u)
            .map(|((a, b), c)| (a + b - 2.0 * c) * s)
            .collect()
    }

    /// `grad[k]` and `hess[i][j] ≈ XᵢXⱼu`.
    fn derivatives(&self, u: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>) {
        let m = self.fields.len();
        let grad: Vec<Vec<f64>> = (0..m).map(|k| self.d1(k, u)).collect();
        let mut hess = vec![vec![Vec::new(); m]; m];
        for i in 0..m {
            for j in 0..m {
                hess[i][j] = if i == j {
                    self.d2(i, u)
                } else {
                    self.d1(i, &grad[j])
                };
            }
        }
        (grad, hess)
    }
}

/// `Σᵢⱼ (δᵢⱼ − ξᵢξⱼ/(1+|ξ|²)) Sᵢⱼ` with `S` the symmetrised Hessian at node `p`.
fn contraction(grad: &[Vec<f64>], hess: &[Vec<Vec<f64>>], scale: &[f64], p: usize) -> (f64, f64) {
    let m = grad.len();
    let xi: Vec<f64> = (0..m).map(|k| scale[k] * grad[k][p]).collect();
    let q = 1.0 + xi.iter().map(|v| v * v).sum::<f64>();
    let mut acc = 0.0;
    for i in 0..m {
        for j in 0..m {
            let s = 0.5 * (hess[i][j][p] + hess[j][i][p]) * scale[i] * scale[j];
            let a = if i == j { 1.0 } else { 0.0 } - xi[i] * xi[j] / q;
            acc += a * s;
        }
    }
    (acc, q)
}

/// `(X₁u, …, X_mu)`.
pub fn grad0(u: &GridFunction) -> Result<Vec<GridFunction>> {
    let st = Stencil::horizontal(&u.grid)?;
    Ok((0..st.fields.len())
        .map(|k| u.with_values(st.d1(k, &u.values)))
        .collect())
}

#[derive(Clone, Debug)]
pub struct CurvatureField {
    pub grad0: Vec<Vec<f64>>,
    /// `hess0[i][j] ≈ XᵢXⱼu`; the two orders differ on non-commutative groups.
    pub hess0: Vec<Vec<Vec<f64>>>,
    pub h0: Vec<f64>,
    pub valid_mask: Vec<bool>,
}

impl CurvatureField {
    /// `√(1+|∇₀u|²)` at node `p`.
    pub fn area_factor(&self, p: usize) -> f64 {
        (1.0 + self.grad0.iter().map(|g| g[p] * g[p]).sum::<f64>()).sqrt()
    }
}

pub fn curvature_h0(u: &GridFunction, window: Option<&Window>) -> Result<CurvatureField> {
    let st = Stencil::horizontal(&u.grid)?;
    let (grad, hess) = st.derivatives(&u.values);
    let ones = vec![1.0; grad.len()];
    let h0 = (0..u.values.len())
        .map(|p| {
            let (c, q) = contraction(&grad, &hess, &ones, p);
            -c / q.sqrt()
        })
        .collect();
    let valid_mask = match window {
        Some(w) => w.mask(&u.grid),
        None => vec![true; u.values.len()],
    };
    Ok(CurvatureField {
        grad0: grad,
        hess0: hess,
        h0,
        valid_mask,
    })
}

/// Mean curvature of the graph for the Riemannian frame `{Xᵢ, εX_k}`, with the
/// same sign convention as `h₀` (so `h_ε → h₀` as `ε → 0`).
pub fn curvature_h_eps(u: &GridFunction, eps: f64) -> Result<GridFunction> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidArgument(format!("ε must be ≥ 0, got {eps}")));
    }
    let st = Stencil::full(&u.grid)?;
    let (grad, hess) = st.derivatives(&u.values);
    let m = u.grid.group.m;
    let scale: Vec<f64> = (0..grad.len()).map(|k| if k < m { 1.0 } else { eps }).collect();
    Ok(u.with_values(
        (0..u.values.len())
            .map(|p| {
                let (c, q) = contraction(&grad, &hess, &scale, p);
                -c / q.sqrt()
            })
            .collect(),
    ))
}

/// `Au`.
pub fn a_apply(u: &GridFunction) -> Result<GridFunction> {
    let st = Stencil::horizontal(&u.grid)?;
    let (grad, hess) = st.derivatives(&u.values);
    let ones = vec![1.0; grad.len()];
    Ok(u.with_values(
        (0..u.values.len())
            .map(|p| -contraction(&grad, &hess, &ones, p).0)
            .collect(),
    ))
}

/// Discrete normal speed `−Au` used by the time stepper and the resolvent.
/// On ℝ¹ it is the conservative form `(arctan u′)′`, which is exactly
/// monotone for `dt ≤ h²/2`; elsewhere the centred operator above.
struct Speed {
    stencil: Stencil,
    one_d: bool,
    h: f64,
}

impl Speed {
    fn new(grid: &Grid) -> Result<Self> {
        let stencil = Stencil::horizontal(grid)?;
        Ok(Self {
            one_d: stencil.fields.len() == 1,
            h: grid.horizontal_spacing(),
            stencil,
        })
    }

    fn eval(&self, u: &[f64]) -> Vec<f64> {
        if self.one_d {
            let fm = &self.stencil.fields[0];
            let p = fm.plus.apply(&self.stencil.grid, u);
            let m = fm.minus.apply(&self.stencil.grid, u);
            let h = fm.step;
            return (0..u.len())
                .map(|i| (((p[i] - u[i]) / h).atan() - ((u[i] - m[i]) / h).atan()) / h)
                .collect();
        }
        let (grad, hess) = self.stencil.derivatives(u);
        let ones = vec![1.0; grad.len()];
        (0..u.len())
            .map(|p| contraction(&grad, &hess, &ones, p).0)
            .collect()
    }

    /// Sum of the diagonal weights of the linearised stencil.
    fn diagonal_bound(&self) -> f64 {
        2.0 * self.stencil.fields.len() as f64 / (self.h * self.h)
    }
}

fn check_finite(u: &[f64]) -> Result<()> {
    match u.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// Explicit solver for `∂ₜu = −Au` up to time `T`.
pub fn direct_flow(f: &GridFunction, t_end: f64, cfg: &SolverConfig) -> Result<GridFunction> {
    cfg.validate()?;
    if !(t_end > 0.0) {
        return Err(Error::InvalidArgument(format!("time must be positive, got {t_end}")));
    }
    let sp = Speed::new(&f.grid)?;
    // the coefficient matrix has eigenvalues in (0, 1]: linear-heat bound
    let dt_max = cfg.cfl_safety / sp.diagonal_bound();
    let n = ((t_end / dt_max) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let dt = t_end / n as f64;
    let mut u = f.values.clone();
    for step in 0..n {
        let v = sp.eval(&u);
        for (a, b) in u.iter_mut().zip(&v) {
            *a += dt * b;
        }
        if step % 64 == 63 {
            check_finite(&u)?;
        }
    }
    check_finite(&u)?;
    Ok(f.with_values(u))
}

/// `(I + λA)⁻¹f` by the relaxation `u ← u + τ(f − u − λAu)`; `τ` keeps every
/// sweep monotone in `u`.
pub fn resolvent(f: &GridFunction, lambda: f64, cfg: &SolverConfig) -> Result<GridFunction> {
    cfg.validate()?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("λ must be positive, got {lambda}")));
    }
    let sp = Speed::new(&f.grid)?;
    let m = sp.stencil.fields.len() as f64;
    let tau = 1.0 / (1.0 + lambda * (2.0 * m + 1.0) / (sp.h * sp.h));
    let mut u = f.values.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..cfg.max_iter {
        let mut r = sp.eval(&u);
        residual = 0.0;
        for i in 0..u.len() {
            r[i] = f.values[i] - u[i] + lambda * r[i];
            residual = residual.max(r[i].abs());
        }
        if !residual.is_finite() {
            check_finite(&u)?;
            return Err(Error::NonFinite { index: 0 });
        }
        if residual <= cfg.resolvent_tol {
            return Ok(f.with_values(u));
        }
        for (a, b) in u.iter_mut().zip(&r) {
            *a += tau * b;
        }
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iter,
        residual,
    })
}

/// `(I + (t/j)A)^{−j} f`.
pub fn crandall_liggett(f: &GridFunction, t: f64, j: usize, cfg: &SolverConfig) -> Result<GridFunction> {
    if j == 0 || !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("need t > 0 and j ≥ 1, got t = {t}, j = {j}")));
    }
    let lambda = t / j as f64;
    let mut u = f.clone();
    for _ in 0..j {
        u = resolvent(&u, lambda, cfg)?;
    }
    Ok(u)
}

/// `sup |u + λAu − f|` for the discrete operator used by [`resolvent`].
pub fn resolvent_residual(u: &GridFunction, f: &GridFunction, lambda: f64) -> Result<f64> {
    let sp = Speed::new(&u.grid)?;
    let v = sp.eval(&u.values);
    Ok((0..v.len())
        .map(|i| (u.values[i] - lambda * v[i] - f.values[i]).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Axis, Boundary};

    fn heis() -> Grid {
        Grid::heisenberg(0.1, 8, 1, 101).unwrap()
    }

    #[test]
    fn heisenberg_z_has_zero_curvature() {
        let g = heis();
        let u = GridFunction::from_fn(&g, |p| p[2]);
        let w = Window::interior(&g, 0.2).unwrap();
        let c = curvature_h0(&u, Some(&w)).unwrap();
        let a = a_apply(&u).unwrap();
        for i in w.indices(&g) {
            let p = g.point(i);
            assert!((c.grad0[0][i] + p[1] / 2.0).abs() < 1e-12);
            assert!((c.grad0[1][i] - p[0] / 2.0).abs() < 1e-12);
            assert!((c.hess0[0][1][i] - 0.5).abs() < 1e-10);
            assert!((c.hess0[1][0][i] + 0.5).abs() < 1e-10);
            assert!(c.h0[i].abs() < 1e-10);
            assert!(a.values[i].abs() < 1e-10);
        }
    }

    #[test]
    fn parabola_curvature_sign() {
        let n = 200;
        let g = Grid::euclidean1(Axis::centered(0.01, n + 1), Boundary::ExtendConstant).unwrap();
        let u = GridFunction::from_fn(&g, |p| 0.5 * p[0] * p[0]);
        let c = curvature_h0(&u, None).unwrap();
        let a = a_apply(&u).unwrap();
        let o = g.nearest(&[0.0]);
        assert!((c.h0[o] + 1.0).abs() < 1e-10);
        assert!((a.values[o] + 1.0).abs() < 1e-10);
        assert!((a.values[o] - c.h0[o] * c.area_factor(o)).abs() < 1e-12);
    }

    #[test]
    fn affine_and_constant_are_stationary() {
        let g = heis();
        let cfg = SolverConfig::default();
        let u = GridFunction::from_fn(&g, |p| 0.3 * p[0] - 0.2 * p[1] + 1.0);
        let w = Window::interior(&g, 0.2).unwrap();
        let a = a_apply(&u).unwrap();
        assert!(w.sup_abs(&g, &a.values) < 1e-12);
        let c = GridFunction::constant(&g, 2.0);
        let out = direct_flow(&c, 0.01, &cfg).unwrap();
        assert_eq!(out.values, c.values);
        let r = resolvent(&c, 0.3, &cfg).unwrap();
        assert_eq!(r.values, c.values);
    }

    #[test]
    fn h_eps_on_euclidean_is_eps_free() {
        let g = Grid::euclidean2(Axis::new(0.0, 1.0, 24), Axis::new(0.0, 1.0, 24), Boundary::Torus).unwrap();
        let tau = std::f64::consts::TAU;
        let u = GridFunction::from_fn(&g, |p| 0.1 * (tau * p[0]).sin() * (tau * p[1]).cos());
        let a = curvature_h_eps(&u, 0.5).unwrap();
        let b = curvature_h_eps(&u, 0.0).unwrap();
        let c = curvature_h0(&u, None).unwrap();
        assert_eq!(a.values, b.values);
        assert!(b.values.iter().zip(&c.h0).all(|(x, y)| (x - y).abs() < 1e-12));
    }

    #[test]
    fn coefficient_matrix_is_degenerate_elliptic() {
        // vᵀa(ξ)v over unit v spans [1/(1+|ξ|²), 1]
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut next = || rng.gen_range(-4.0f64..4.0);
        for _ in 0..500 {
            let grad = vec![vec![next()], vec![next()]];
            let (a, b) = (next(), next());
            let n = (a * a + b * b).sqrt();
            let v = [a / n, b / n];
            let hess: Vec<Vec<Vec<f64>>> = (0..2).map(|i| (0..2).map(|j| vec![v[i] * v[j]]).collect()).collect();
            let (c, q) = contraction(&grad, &hess, &[1.0, 1.0], 0);
            assert!(c >= 1.0 / q - 1e-12 && c <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn resolvent_satisfies_its_equation() {
        let g = Grid::euclidean1(Axis::new(0.0, std::f64::consts::TAU, 64), Boundary::Torus).unwrap();
        let f = GridFunction::from_fn(&g, |p| 0.3 * p[0].sin());
        let cfg = SolverConfig::default();
        let u = resolvent(&f, 0.05, &cfg).unwrap();
        assert!(resolvent_residual(&u, &f, 0.05).unwrap() <= cfg.resolvent_tol);
        assert!(u.sup_norm() < f.sup_norm());
    }
}
