#![allow(dead_code)]

use carnot_mbo::{Axis, Boundary, Grid, GridFunction};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

pub fn line(n: usize, l: f64) -> Grid {
    Grid::euclidean1(Axis::new(-l / 2.0, l, n), Boundary::Torus).unwrap()
}

/// `[0, 2π)` torus with `n` nodes.
pub fn circle(n: usize) -> Grid {
    Grid::euclidean1(Axis::new(0.0, TAU, n), Boundary::Torus).unwrap()
}

/// Random trigonometric polynomial of low degree on a 1D torus.
pub fn random_periodic(g: &Grid, rng: &mut ChaCha8Rng, amp: f64) -> GridFunction {
    let a = g.axes[0];
    let coeffs: Vec<(f64, f64)> = (0..4)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let shift = rng.gen_range(-1.0..1.0);
    GridFunction::from_fn(g, |p| {
        let th = TAU * (p[0] - a.origin) / a.extent;
        shift
            + amp
                * coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, (c, s))| {
                        let k = (k + 1) as f64;
                        (c * (k * th).cos() + s * (k * th).sin()) / (k * k)
                    })
                    .sum::<f64>()
    })
}

/// Smooth random field on an ℍ¹ box: a tilted plane plus a few Gaussian bumps.
pub fn random_heisenberg(g: &Grid, rng: &mut ChaCha8Rng, amp: f64) -> GridFunction {
    let (ex, ez) = (g.axes[0].end(), g.axes[2].end());
    let plane = [rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)];
    let bumps: Vec<[f64; 5]> = (0..3)
        .map(|_| {
            [
                rng.gen_range(-0.5..0.5) * ex,
                rng.gen_range(-0.5..0.5) * ex,
                rng.gen_range(-0.5..0.5) * ez,
                rng.gen_range(-1.0..1.0) * amp,
                rng.gen_range(0.3..0.8) * ex,
            ]
        })
        .collect();
    let c = rng.gen_range(-1.0..1.0);
    GridFunction::from_fn(g, |p| {
        let mut v = c + plane[0] * p[0] + plane[1] * p[1] + plane[2] * p[2] / ez.max(1e-9) * ex;
        for b in &bumps {
            let r2 = (p[0] - b[0]).powi(2) + (p[1] - b[1]).powi(2) + ((p[2] - b[2]) * ex / ez).powi(2);
            v += b[3] * (-r2 / (b[4] * b[4])).exp();
        }
        v
    })
}

/// Nonnegative smooth field, to build ordered pairs `f ≤ f + bump`.
pub fn random_bump(f: &GridFunction, rng: &mut ChaCha8Rng, amp: f64) -> GridFunction {
    let g = &f.grid;
    let centre: Vec<f64> = g.axes.iter().map(|a| a.coord(rng.gen_range(0..a.count))).collect();
    let widths: Vec<f64> = g.axes.iter().map(|a| a.extent * rng.gen_range(0.1..0.3)).collect();
    let a = amp * rng.gen_range(0.1..1.0);
    GridFunction::from_fn(g, |p| {
        let r2: f64 = p.iter().zip(&centre).zip(&widths).map(|((x, c), w)| ((x - c) / w).powi(2)).sum();
        a * (-r2).exp()
    })
}

pub fn sup_abs(f: &GridFunction) -> f64 {
    f.values.iter().fold(0.0, |m, v| m.max(v.abs()))
}
