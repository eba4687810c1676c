//! Heat semigroups `e^{tΔ₀}` and `e^{tΔ_ε}` on grid functions.
//!
//! `Δ_ε = Σ_{d(i)=1} Xᵢ² + ε² Σ_{d(i)>1} Xᵢ²`. Each `Xᵢ²` is discretised by the
//! second difference along exact lattice moves,
//! `Xᵢ²u(p) ≈ (u(p·e^{hXᵢ}) + u(p·e^{−hXᵢ}) − 2u(p)) / h²`,
//! and time is advanced by explicit Euler. Under the step bound every update
//! is a convex combination of node values, so the scheme is monotone. Moves
//! come in inverse pairs, so on the torus it also conserves mass exactly.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction, Window};
use crate::group::{hnorm_eps_unchecked, GroupKind};
use crate::lattice::{higher_moves, horizontal_moves, Move};
use crate::par;
use crate::report::DiagnosticsReport;

/// Escaping kernel mass tolerated by [`kernel_estimate`].
pub const KERNEL_TAIL_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeatOperatorSpec {
    pub eps: f64,
    pub cfl_safety: f64,
}

impl Default for HeatOperatorSpec {
    fn default() -> Self {
        Self {
            eps: 0.0,
            cfl_safety: 0.5,
        }
    }
}

impl HeatOperatorSpec {
    pub fn new(eps: f64, cfl_safety: f64) -> Result<Self> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::InvalidArgument(format!("ε must be ≥ 0, got {eps}")));
        }
        if !(cfl_safety > 0.0 && cfl_safety < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "cfl_safety must lie in (0,1), got {cfl_safety}"
            )));
        }
        Ok(Self { eps, cfl_safety })
    }
}

/// A heat operator compiled for one grid.
#[derive(Clone, Debug)]
pub struct HeatOperator {
    grid: Grid,
    terms: Vec<(f64, Move)>,
    total_weight: f64,
    safety: f64,
}

impl HeatOperator {
    pub fn new(grid: &Grid, spec: &HeatOperatorSpec) -> Result<Self> {
        let spec = HeatOperatorSpec::new(spec.eps, spec.cfl_safety)?;
        let mut terms = Vec::new();
        for fm in horizontal_moves(grid)? {
            let w = 1.0 / (fm.step * fm.step);
            terms.push((w, fm.plus));
            terms.push((w, fm.minus));
        }
        if spec.eps > 0.0 {
            for fm in higher_moves(grid)? {
                let w = spec.eps * spec.eps / (fm.step * fm.step);
                terms.push((w, fm.plus));
                terms.push((w, fm.minus));
            }
        }
        let total_weight = terms.iter().map(|(w, _)| w).sum();
        Ok(Self {
            grid: grid.clone(),
            terms,
            total_weight,
            safety: spec.cfl_safety,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `cfl_safety` times the largest step keeping the update a convex combination.
    pub fn cfl_dt(&self) -> f64 {
        self.safety / self.total_weight
    }

    pub fn steps_for(&self, t: f64) -> usize {
        ((t / self.cfl_dt()) * (1.0 - 1e-12)).ceil().max(1.0) as usize
    }

    /// One Euler step from `u` into `out`; no checks.
    pub fn step_into(&self, u: &[f64], dt: f64, out: &mut [f64]) {
        let len = self.grid.row_len();
        let diag = 1.0 - dt * self.total_weight;
        par::for_each_chunk(out, len, |r, row| {
            let own = &u[r * len..(r + 1) * len];
            for (o, &v) in row.iter_mut().zip(own) {
                *o = diag * v;
            }
            for (w, mv) in &self.terms {
                mv.accumulate_row(r, len, u, dt * w, row);
            }
        });
    }

    pub fn step(&self, w: &GridFunction, dt: f64) -> Result<GridFunction> {
        let bound = self.cfl_dt();
        if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt, bound });
        }
        let mut out = vec![0.0; w.values.len()];
        self.step_into(&w.values, dt, &mut out);
        let out = w.with_values(out);
        out.check_finite()?;
        Ok(out)
    }

    /// Advance raw values by time `t` with uniform steps.
    pub fn evolve_values(&self, mut u: Vec<f64>, t: f64) -> Result<Vec<f64>> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!("time must be positive, got {t}")));
        }
        let n = self.steps_for(t);
        let dt = t / n as f64;
        let mut tmp = vec![0.0; u.len()];
        for _ in 0..n {
            self.step_into(&u, dt, &mut tmp);
            std::mem::swap(&mut u, &mut tmp);
        }
        if let Some(index) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(u)
    }

    pub fn evolve(&self, f0: &GridFunction, t: f64) -> Result<GridFunction> {
        Ok(f0.with_values(self.evolve_values(f0.values.clone(), t)?))
    }
}

pub fn heat_step(w: &GridFunction, spec: &HeatOperatorSpec, dt: f64) -> Result<GridFunction> {
    HeatOperator::new(&w.grid, spec)?.step(w, dt)
}

pub fn cfl_dt(grid: &Grid, spec: &HeatOperatorSpec) -> Result<f64> {
    Ok(HeatOperator::new(grid, spec)?.cfl_dt())
}

pub fn heat_evolve(f0: &GridFunction, spec: &HeatOperatorSpec, t: f64) -> Result<GridFunction> {
    HeatOperator::new(&f0.grid, spec)?.evolve(f0, t)
}

/// Mass of the 1D kernel of `∂ₜ = ∂²` below level `s`: `½(1 + erf(s/(2√t)))`.
pub fn vertical_cdf(t: f64, s: f64) -> f64 {
    0.5 * erfc(-s / (2.0 * t.sqrt()))
}

/// Upper bound for the continuum kernel mass outside the box, from the
/// Gaussian tails of the horizontal marginals and the exponential tail of the
/// vertical one.
pub fn escaping_mass(grid: &Grid, eps: f64, t: f64) -> f64 {
    let e = vec![0.0; grid.dim()];
    let d = grid.face_distances(&e);
    let st = t.sqrt();
    let mut tail = 0.0;
    for (k, &dk) in d.iter().enumerate() {
        tail += if k < grid.group.m {
            erfc(dk / (2.0 * st))
        } else if eps > 0.0 {
            4.0 / std::f64::consts::PI * (-std::f64::consts::PI * dk / (4.0 * t)).exp()
                + erfc(dk / (4.0 * eps * st))
        } else {
            4.0 / std::f64::consts::PI * (-std::f64::consts::PI * dk / (2.0 * t)).exp()
        };
    }
    tail
}

/// Discrete approximation of `Γ_ε(·, t)`: the evolved unit-mass delta at the
/// node nearest the identity.
pub fn kernel_estimate(grid: &Grid, spec: &HeatOperatorSpec, t: f64) -> Result<GridFunction> {
    let escaping = escaping_mass(grid, spec.eps, t);
    if escaping > KERNEL_TAIL_TOL {
        return Err(Error::BoxTooSmall {
            escaping,
            tolerance: KERNEL_TAIL_TOL,
        });
    }
    let op = HeatOperator::new(grid, spec)?;
    let mut delta = vec![0.0; grid.len()];
    let e = grid.nearest(&vec![0.0; grid.dim()]);
    match vertical_ratio(grid) {
        None => delta[e] = 1.0 / grid.cell_volume(),
        Some(q) => {
            // Horizontal moves preserve k − q·i·j mod 2q, so a single-node
            // delta only ever reaches one residue class and the evolved kernel
            // is striped along z. Spreading the unit mass over 2q+1 vertical
            // nodes (ends halved) loads every class equally.
            let q = q as isize;
            for dk in -q..=q {
                let w = if dk.abs() == q { 0.5 } else { 1.0 } / (2 * q) as f64;
                let k = e as isize + dk;
                if k < 0 || k as usize >= grid.len() {
                    return Err(Error::BoxTooSmall {
                        escaping: 1.0,
                        tolerance: KERNEL_TAIL_TOL,
                    });
                }
                delta[k as usize] += w / grid.cell_volume();
            }
        }
    }
    Ok(GridFunction {
        grid: grid.clone(),
        values: op.evolve_values(delta, t)?,
    })
}

/// The integer `q` with `h_z = h²/(2q)` on ℍ¹ grids.
pub fn vertical_ratio(grid: &Grid) -> Option<usize> {
    if grid.group.kind != GroupKind::Heisenberg1 {
        return None;
    }
    let h = grid.horizontal_spacing();
    let q = h * h / (2.0 * grid.spacing(2));
    Some(q.round().max(1.0) as usize)
}

/// Multilinear interpolation; `None` outside the box.
pub fn interpolate(f: &GridFunction, p: &[f64]) -> Option<f64> {
    let g = &f.grid;
    let mut base = vec![0usize; g.dim()];
    let mut frac = vec![0.0; g.dim()];
    for (k, a) in g.axes.iter().enumerate() {
        let mut u = (p[k] - a.origin) / a.spacing();
        if (u - u.round()).abs() < 1e-9 {
            u = u.round();
        }
        if u < 0.0 || u > (a.count - 1) as f64 {
            return None;
        }
        let i = (u.floor() as usize).min(a.count - 2);
        base[k] = i;
        frac[k] = u - i as f64;
    }
    let mut acc = 0.0;
    for corner in 0..(1usize << g.dim()) {
        let mut w = 1.0;
        let mut idx = base.clone();
        for k in 0..g.dim() {
            if corner >> k & 1 == 1 {
                w *= frac[k];
                idx[k] += 1;
            } else {
                w *= 1.0 - frac[k];
            }
        }
        if w != 0.0 {
            acc += w * f.values[g.flat_index(&idx)];
        }
    }
    Some(acc)
}

/// Compare the kernel at `t₂` with the kernel at `t₁` transported by the
/// parabolic scaling `Γ(x, t₂) = (t₁/t₂)^{Q/2} Γ(δ_{√(t₁/t₂)} x, t₁)`.
/// Reports the sup error relative to `max Γ(·, t₂)` over nodes whose image
/// stays in the box, and the exponent that best explains the data.
pub fn rescaling_check(grid: &Grid, spec: &HeatOperatorSpec, t1: f64, t2: f64) -> Result<DiagnosticsReport> {
    if spec.eps != 0.0 {
        return Err(Error::InvalidArgument("rescaling_check needs ε = 0".into()));
    }
    let q = grid.group.homogeneous_dim() as f64;
    let mut rep = DiagnosticsReport::new("rescaling");
    rep.metric("t1", t1).metric("t2", t2).metric("expected_exponent", q / 2.0);
    let k1 = kernel_estimate(grid, spec, t1)?;
    let k2 = if t1 == t2 { k1.clone() } else { kernel_estimate(grid, spec, t2)? };
    let lambda = (t1 / t2).sqrt();
    let scale = (t1 / t2).powf(q / 2.0);
    let peak = k2.max();
    let peak1 = k1.max();
    let mut err = 0.0f64;
    let (mut num, mut den) = (0.0, 0.0);
    let log_ratio = (t1 / t2).ln();
    for i in 0..grid.len() {
        let p = grid.point(i);
        let dp = grid.group.dilate(lambda, &p)?;
        let Some(v1) = interpolate(&k1, &dp) else { continue };
        let v2 = k2.values[i];
        err = err.max((v2 - scale * v1).abs() / peak);
        if t1 != t2 && v1 > 1e-3 * peak1 && v2 > 1e-3 * peak {
            num += v2 * (v2 / v1).ln() / log_ratio;
            den += v2;
        }
    }
    rep.metric("sup_rel_error", err);
    if den > 0.0 {
        rep.metric("fitted_exponent", num / den);
    }
    Ok(rep)
}

/// Volume of the ball `{|v|_ε < r}`.
pub fn ball_volume(kind: GroupKind, eps: f64, r: f64) -> f64 {
    match kind {
        GroupKind::Euclidean(1) => 2.0 * r,
        GroupKind::Euclidean(_) => 2.0 * r * r,
        GroupKind::Heisenberg1 => {
            // horizontal ℓ¹ shell of radius ρ has length 4ρ; the vertical
            // section at slack s = r − ρ is |z| < max(εs, s²)
            let n = 4000;
            let h = r / n as f64;
            let f = |rho: f64| {
                let s = r - rho;
                8.0 * rho * (eps * s).max(s * s)
            };
            let mut acc = f(0.0) + f(r);
            for i in 1..n {
                acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
            }
            acc * h / 3.0
        }
    }
}

/// Gaussian envelope parameters fitted to a kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianFit {
    /// Rate in `exp(−C₂ d²/t)`.
    pub c2: f64,
    /// Multiplicative constant such that `C₁⁻¹ ≤ Γ|B| e^{C₂d²/t} ≤ C₁` at 99% of points.
    pub c1: f64,
    pub violation_fraction: f64,
    pub points: usize,
}

fn kernel_samples(k: &GridFunction, eps: f64, t: f64, window: &Window) -> Vec<(f64, f64)> {
    let g = &k.grid;
    let vol = ball_volume(g.group.kind, eps, t.sqrt());
    let floor = 1e-8 * k.max();
    window
        .indices(g)
        .into_iter()
        .filter(|&i| k.values[i] > floor)
        .map(|i| {
            let p = g.point(i);
            let d = hnorm_eps_unchecked(&g.group.degrees, g.group.m, eps, &p);
            (d * d / t, (k.values[i] * vol).ln())
        })
        .collect()
}

fn fit_gaussian(samples: &[(f64, f64)]) -> Result<GaussianFit> {
    let n = samples.len();
    if n < 3 {
        return Err(Error::RankDeficient(format!("only {n} kernel samples")));
    }
    let nf = n as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / nf;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / nf;
    let sxx: f64 = samples.iter().map(|s| (s.0 - mx).powi(2)).sum();
    let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::RankDeficient("all samples at one distance".into()));
    }
    let c2 = -sxy / sxx;
    let mut dev: Vec<f64> = samples.iter().map(|s| (s.1 + c2 * s.0).abs()).collect();
    dev.sort_by(f64::total_cmp);
    let k = ((0.99 * nf).ceil() as usize).clamp(1, n) - 1;
    let log_c1 = dev[k];
    let violations = dev.iter().filter(|&&d| d > log_c1).count();
    Ok(GaussianFit {
        c2,
        c1: log_c1.exp(),
        violation_fraction: violations as f64 / nf,
        points: n,
    })
}

/// Fit `C₁⁻¹|B_ε(√t)|⁻¹e^{−C₂d²/t} ≤ Γ_ε ≤ C₁|B_ε(√t)|⁻¹e^{−C₂d²/t}` on the
/// nodes carrying non-negligible kernel mass.
pub fn gaussian_bound_check(grid: &Grid, spec: &HeatOperatorSpec, t: f64) -> Result<DiagnosticsReport> {
    let k = kernel_estimate(grid, spec, t)?;
    let fit = fit_gaussian(&kernel_samples(&k, spec.eps, t, &Window::full(grid)))?;
    let mut rep = DiagnosticsReport::new("gaussian_bound");
    rep.metric("t", t)
        .metric("eps", spec.eps)
        .metric("c1", fit.c1)
        .metric("c2", fit.c2)
        .metric("points", fit.points as f64);
    rep.check_le("violation_fraction", fit.violation_fraction, 0.01);
    Ok(rep)
}

pub fn fit_kernel_envelope(k: &GridFunction, eps: f64, t: f64) -> Result<GaussianFit> {
    fit_gaussian(&kernel_samples(k, eps, t, &Window::full(&k.grid)))
}

/// `sup_window |Γ_ε − Γ₀|` for each ε, plus the fraction of window nodes where
/// `Γ_ε` stays under the envelope fitted to `Γ₀` (constants uniform in ε).
pub fn eps_convergence_check(
    grid: &Grid,
    t: f64,
    eps_list: &[f64],
    window: &Window,
    cfl_safety: f64,
) -> Result<DiagnosticsReport> {
    if eps_list.iter().any(|&e| !(e > 0.0)) || eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument(
            "ε list must be positive and strictly decreasing".into(),
        ));
    }
    let k0 = kernel_estimate(grid, &HeatOperatorSpec::new(0.0, cfl_safety)?, t)?;
    let env = fit_kernel_envelope(&k0, 0.0, t)?;
    let mut dists = Vec::new();
    let mut dominated = Vec::new();
    let idx = window.indices(grid);
    for &eps in eps_list {
        let ke = kernel_estimate(grid, &HeatOperatorSpec::new(eps, cfl_safety)?, t)?;
        dists.push(window.sup_diff(&ke, &k0));
        let vol = ball_volume(grid.group.kind, eps, t.sqrt());
        let under = idx
            .iter()
            .filter(|&&i| {
                let p = grid.point(i);
                let d = hnorm_eps_unchecked(&grid.group.degrees, grid.group.m, eps, &p);
                ke.values[i] <= env.c1 / vol * (-env.c2 * d * d / t).exp()
            })
            .count();
        dominated.push(under as f64 / idx.len() as f64);
    }
    let mut rep = DiagnosticsReport::new("eps_convergence");
    rep.metric("t", t);
    rep.push_series("eps", eps_list.to_vec());
    rep.push_series("sup_dist", dists.clone());
    rep.push_series("dominated_fraction", dominated);
    rep.check_true(
        "sup_dist_strictly_decreasing",
        dists.windows(2).all(|w| w[1] < w[0]) || dists.iter().all(|&d| d == 0.0),
    );
    Ok(rep)
}
