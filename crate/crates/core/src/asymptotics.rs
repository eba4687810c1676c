//! Small-time expansions of the diffused subgraph indicator.
//!
//! On the graph, `w(x, f(x), t) = ½ − c(x)√t + O(t)` with
//! `c(x) = h₀(x)·∫_Π Γ(z,1) dσ₀(z)`, `Π` the intrinsic tangent plane; and
//! `H(t)f − f = −t·Af + o(t)`.

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::flow::{a_apply, curvature_h0};
use crate::grid::{Grid, GridFunction, Window};
use crate::heat::{kernel_estimate, HeatOperatorSpec};
use crate::mbo::{build_level_stack, h_apply, LevelGrid};
use crate::par;
use crate::report::DiagnosticsReport;

/// Curvatures below this are too flat for a meaningful `c/h₀` ratio.
pub const H0_FLOOR: f64 = 0.05;

/// `V(x, f(x))` at every node: the diffused indicator evaluated on the graph.
pub fn boundary_values(f: &GridFunction, t: f64, cfg: &SolverConfig) -> Result<GridFunction> {
    let stack = build_level_stack(f, t, &LevelGrid::auto(f, t, cfg), cfg)?;
    Ok(f.with_values(
        par::map_range(f.values.len(), |i| stack.value(i, f.values[i])),
    ))
}

pub fn boundary_value(f: &GridFunction, index: usize, t: f64, cfg: &SolverConfig) -> Result<f64> {
    if index >= f.values.len() {
        return Err(Error::InvalidArgument(format!("node {index} outside the grid")));
    }
    Ok(boundary_values(f, t, cfg)?.values[index])
}

#[derive(Clone, Debug)]
pub struct ExpansionFit {
    pub sample_points: Vec<usize>,
    pub times: Vec<f64>,
    /// `w − ½ ≈ −c√t + d·t`, per point.
    pub fitted_c: Vec<f64>,
    pub fitted_d: Vec<f64>,
    /// Standard error of `c`.
    pub sigma_c: Vec<f64>,
    pub h0_at_points: Vec<f64>,
    /// `c/h₀` where `|h₀| ≥ H0_FLOOR`.
    pub ratio: Vec<Option<f64>>,
    /// `residuals[p][k]` at `times[k]`.
    pub residuals: Vec<Vec<f64>>,
}

impl ExpansionFit {
    pub fn ratios(&self) -> Vec<f64> {
        self.ratio.iter().flatten().copied().collect()
    }

    pub fn mean_ratio(&self) -> Option<f64> {
        let r = self.ratios();
        (!r.is_empty()).then(|| r.iter().sum::<f64>() / r.len() as f64)
    }

    /// `(max − min) / |mean|` of the reported ratios.
    pub fn ratio_spread(&self) -> Option<f64> {
        let r = self.ratios();
        let mean = self.mean_ratio()?;
        let (lo, hi) = r
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        Some((hi - lo) / mean.abs())
    }
}

/// Least-squares fit of `w(x,t) − ½ = −c√t + d·t` at the given nodes.
pub fn taylor_fit(f: &GridFunction, points: &[usize], times: &[f64], cfg: &SolverConfig) -> Result<ExpansionFit> {
    if times.len() < 3 {
        return Err(Error::RankDeficient(format!("need ≥ 3 times, got {}", times.len())));
    }
    if times.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("times must be strictly decreasing".into()));
    }
    let h = f.grid.horizontal_spacing();
    if let Some(&t) = times.iter().find(|&&t| 2.0 * t.sqrt() < 4.0 * h) {
        return Err(Error::InvalidArgument(format!(
            "t = {t} is under-resolved: 2√t < 4h = {}",
            4.0 * h
        )));
    }
    let w: Vec<GridFunction> = times
        .iter()
        .map(|&t| boundary_values(f, t, cfg))
        .collect::<Result<_>>()?;
    let curv = curvature_h0(f, None)?;
    // normal equations for columns a = −√t, b = t
    let (mut saa, mut sab, mut sbb) = (0.0, 0.0, 0.0);
    for &t in times {
        let (a, b) = (-t.sqrt(), t);
        saa += a * a;
        sab += a * b;
        sbb += b * b;
    }
    let det = saa * sbb - sab * sab;
    if det.abs() <= 1e-14 * saa * sbb {
        return Err(Error::RankDeficient("times too close together".into()));
    }
    let dof = times.len() as f64 - 2.0;
    let mut fit = ExpansionFit {
        sample_points: points.to_vec(),
        times: times.to_vec(),
        fitted_c: Vec::new(),
        fitted_d: Vec::new(),
        sigma_c: Vec::new(),
        h0_at_points: Vec::new(),
        ratio: Vec::new(),
        residuals: Vec::new(),
    };
    for &p in points {
        if p >= f.values.len() {
            return Err(Error::InvalidArgument(format!("node {p} outside the grid")));
        }
        let (mut sya, mut syb) = (0.0, 0.0);
        for (k, &t) in times.iter().enumerate() {
            let y = w[k].values[p] - 0.5;
            sya += -t.sqrt() * y;
            syb += t * y;
        }
        let c = (sbb * sya - sab * syb) / det;
        let d = (saa * syb - sab * sya) / det;
        let res: Vec<f64> = times
            .iter()
            .enumerate()
            .map(|(k, &t)| w[k].values[p] - 0.5 - (-c * t.sqrt() + d * t))
            .collect();
        let rss: f64 = res.iter().map(|r| r * r).sum();
        let s2 = if dof > 0.0 { rss / dof } else { 0.0 };
        let h0 = curv.h0[p];
        fit.fitted_c.push(c);
        fit.fitted_d.push(d);
        fit.sigma_c.push((s2 * sbb / det).sqrt());
        fit.h0_at_points.push(h0);
        fit.ratio.push((h0.abs() >= H0_FLOOR).then(|| c / h0));
        fit.residuals.push(res);
    }
    Ok(fit)
}

/// `∫_Π Γ(z,1) dσ₀(z)` over the intrinsic plane `z_{n+1} = Σ pᵢzᵢ` through
/// the identity, with `p` the horizontal gradient. The `𝔾×ℝ` kernel
/// factorises into the group kernel times the vertical Gaussian, and the
/// parabolic scaling moves the integral to time `s`:
/// `√s·√(1+|p|²)·∫_𝔾 Γ_𝔾(z,s) g_s(Σ pᵢzᵢ) dz`.
pub fn plane_integral(grid: &Grid, spec: &HeatOperatorSpec, gradient: &[f64], s: f64) -> Result<f64> {
    let m = grid.group.m;
    if gradient.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: gradient.len(),
        });
    }
    let k = kernel_estimate(grid, spec, s)?;
    let norm = 1.0 / (4.0 * std::f64::consts::PI * s).sqrt();
    let terms: Vec<f64> = (0..grid.len())
        .map(|i| {
            let z = grid.point(i);
            let y: f64 = gradient.iter().zip(&z).map(|(a, b)| a * b).sum();
            k.values[i] * norm * (-y * y / (4.0 * s)).exp()
        })
        .collect();
    let q = 1.0 + gradient.iter().map(|v| v * v).sum::<f64>();
    Ok(s.sqrt() * q.sqrt() * par::pairwise_sum(&terms) * grid.cell_volume())
}

/// `e(t) = sup_window |(H(t)f − f)/t + Af|` for each `t`.
pub fn prop42_check(f: &GridFunction, times: &[f64], cfg: &SolverConfig, window: &Window) -> Result<DiagnosticsReport> {
    if times.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("times must be strictly decreasing".into()));
    }
    let af = a_apply(f)?;
    let mut errs = Vec::with_capacity(times.len());
    for &t in times {
        let hf = h_apply(f, t, cfg)?;
        let e = window
            .indices(&f.grid)
            .into_iter()
            .map(|i| ((hf.values[i] - f.values[i]) / t + af.values[i]).abs())
            .fold(0.0, f64::max);
        errs.push(e);
    }
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[1] / w[0]).collect();
    let mut rep = DiagnosticsReport::new("prop42");
    rep.push_series("t", times.to_vec());
    rep.push_series("e", errs.clone());
    rep.push_series("ratio", ratios);
    rep.check_true("e_nonincreasing", errs.windows(2).all(|w| w[1] <= w[0]));
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Axis, Boundary};

    #[test]
    fn constant_graph_sits_at_half() {
        let g = Grid::euclidean1(Axis::new(0.0, 1.0, 32), Boundary::Torus).unwrap();
        let f = GridFunction::constant(&g, -0.4);
        let cfg = SolverConfig::default();
        for t in [0.01, 0.003] {
            let w = boundary_values(&f, t, &cfg).unwrap();
            assert!(w.values.iter().all(|&v| (v - 0.5).abs() < 1e-12));
        }
    }

    #[test]
    fn flat_plane_integral() {
        let g = Grid::euclidean1(Axis::new(-5.0, 10.0, 400), Boundary::Torus).unwrap();
        let v = plane_integral(&g, &HeatOperatorSpec::default(), &[0.0], 0.2).unwrap();
        assert!((v - (4.0 * std::f64::consts::PI).powf(-0.5)).abs() < 1e-12);
        assert!(plane_integral(&g, &HeatOperatorSpec::default(), &[0.7], 0.2).unwrap() > 0.0);
    }

    #[test]
    fn fit_needs_three_times() {
        let g = Grid::euclidean1(Axis::new(0.0, 1.0, 32), Boundary::Torus).unwrap();
        let f = GridFunction::constant(&g, 0.0);
        let cfg = SolverConfig::default();
        assert!(matches!(
            taylor_fit(&f, &[0], &[0.02, 0.01], &cfg),
            Err(Error::RankDeficient(_))
        ));
    }
}
