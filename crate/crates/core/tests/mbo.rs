mod common;

use carnot_mbo::heat::vertical_cdf;
use carnot_mbo::mbo::{build_level_stack, h_apply, h_apply_with_levels, mbo_flow, threshold, threshold_residual, LevelGrid};
use carnot_mbo::{Error, GridFunction, SolverConfig};
use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{PI, TAU};

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

/// `H(t)f(x)` on the circle of length 2π by direct quadrature of the
/// continuum kernel: root in λ of `Σ_y G_t(x − y) Φ_t(f(y) − λ) h`, with the
/// periodised Gaussian `G_t`.
fn quadrature_threshold(f: &[f64], t: f64, x: usize) -> f64 {
    let n = f.len();
    let h = TAU / n as f64;
    let weights: Vec<f64> = (0..n)
        .map(|k| {
            let d = (k as f64) * h;
            (-3..=3)
                .map(|w| {
                    let s = d + w as f64 * TAU;
                    (4.0 * PI * t).powf(-0.5) * (-s * s / (4.0 * t)).exp() * h
                })
                .sum()
        })
        .collect();
    let w = |lambda: f64| -> f64 {
        (0..n)
            .map(|y| weights[(x + n - y) % n] * vertical_cdf(t, f[y] - lambda))
            .sum()
    };
    let (mut lo, mut hi) = (-10.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if w(mid) > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn threshold_matches_continuum_quadrature() {
    let g = circle(256);
    let f = GridFunction::from_fn(&g, |p| 0.3 * p[0].sin() + 0.1 * (2.0 * p[0]).cos());
    let t = 0.02;
    let out = h_apply(&f, t, &cfg()).unwrap();
    for x in (0..256).step_by(17) {
        let exact = quadrature_threshold(&f.values, t, x);
        assert!((out.values[x] - exact).abs() < 2e-5, "x {x}: {} vs {exact}", out.values[x]);
    }
}

#[test]
fn slices_decrease_in_the_level() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let g = circle(64);
    let f = random_periodic(&g, &mut rng, 0.5);
    let t = 0.01;
    let stack = build_level_stack(&f, t, &LevelGrid::auto(&f, t, &cfg()), &cfg()).unwrap();
    for i in 0..g.len() {
        let col = stack.column(i);
        assert!(col.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(col.windows(2).all(|w| w[1] < w[0] || w[0] - w[1] < 1e-15));
    }
    let out = threshold(&stack).unwrap();
    assert!(threshold_residual(&stack, &out) <= cfg().root_tol);
}

#[test]
fn interpolated_slices_are_monotone_between_levels() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let g = circle(48);
    let f = random_periodic(&g, &mut rng, 0.5);
    let t = 0.02;
    // the spectral interpolant may ripple at rounding level where the
    // profile saturates; the monotone cubic may not ripple at all
    let cases = [
        (LevelGrid::auto(&f, t, &cfg()), 1e-11),
        (LevelGrid::uniform(f.min() - 1.0, f.max() + 1.0, 33), 1e-15),
    ];
    for (lv, slack) in cases {
        let stack = build_level_stack(&f, t, &lv, &cfg()).unwrap();
        let (lo, hi) = (stack.levels[0], *stack.levels.last().unwrap());
        for i in (0..g.len()).step_by(5) {
            let vals: Vec<f64> = (0..=2000)
                .map(|k| stack.value(i, lo + (hi - lo) * k as f64 / 2000.0))
                .collect();
            assert!(vals.windows(2).all(|w| w[1] <= w[0] + slack));
        }
    }
}

#[test]
fn more_levels_change_less() {
    let g = circle(64);
    let f = GridFunction::from_fn(&g, |p| 0.4 * p[0].sin());
    let t = 0.01;
    let (lo, hi) = (f.min() - 0.6, f.max() + 0.6);
    let run = |k| h_apply_with_levels(&f, t, &LevelGrid::Chebyshev { lo, hi, k }, &cfg()).unwrap();
    let reference = run(160);
    let errs: Vec<f64> = [20, 40, 80].iter().map(|&k| run(k).sup_diff(&reference)).collect();
    assert!(errs[1] < errs[0] && errs[2] <= errs[1].max(1e-9), "{errs:?}");
    let uniform = |k| h_apply_with_levels(&f, t, &LevelGrid::uniform(lo, hi, k), &cfg()).unwrap();
    let uerrs: Vec<f64> = [33, 65, 129].iter().map(|&k| uniform(k).sup_diff(&reference)).collect();
    assert!(uerrs[1] < uerrs[0] && uerrs[2] < uerrs[1], "{uerrs:?}");
}

#[test]
fn hlip_properties_on_the_line() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let g = circle(64);
    let tol = 2.0 * cfg().root_tol;
    for _ in 0..5 {
        let f = random_periodic(&g, &mut rng, 0.6);
        let g2 = f.zip_map(&random_bump(&f, &mut rng, 0.5), |a, b| a + b);
        let (hf, hg) = (h_apply(&f, 0.01, &cfg()).unwrap(), h_apply(&g2, 0.01, &cfg()).unwrap());
        assert!(hf.values.iter().zip(&hg.values).all(|(a, b)| a <= &(b + tol)));
        assert!(hf.sup_diff(&hg) <= f.sup_diff(&g2) + tol);
        let shifted = h_apply(&f.map(|v| v + 0.37), 0.01, &cfg()).unwrap();
        assert!(shifted.zip_map(&hf, |a, b| a - b - 0.37).values.iter().all(|v| v.abs() <= tol));
    }
}

#[test]
fn one_step_flow_is_one_application() {
    let g = circle(64);
    let f = GridFunction::from_fn(&g, |p| 0.3 * p[0].sin());
    let flow = mbo_flow(&f, 0.02, 1, &cfg(), false).unwrap();
    assert_eq!(flow.result, h_apply(&f, 0.02, &cfg()).unwrap());
    assert_eq!(flow.increments.len(), 1);
    assert!(!flow.pinned);
}

#[test]
fn small_steps_are_flagged_as_pinned() {
    let g = circle(64);
    let f = GridFunction::from_fn(&g, |p| 0.3 * p[0].sin());
    let h = g.spacing(0);
    let t = 0.5 * h * h;
    assert!(mbo_flow(&f, t, 1, &cfg(), false).unwrap().pinned);
    assert!(!mbo_flow(&f, 4.0 * t, 1, &cfg(), false).unwrap().pinned);
}

#[test]
fn narrow_levels_name_the_offending_node() {
    let g = circle(32);
    let f = GridFunction::from_fn(&g, |p| p[0].sin());
    let stack = build_level_stack(&f, 0.01, &LevelGrid::uniform(-0.2, 0.2, 9), &cfg());
    match stack {
        Err(Error::Bracket { index, .. }) => assert!(index < g.len()),
        other => panic!("expected a bracket error, got {other:?}"),
    }
}
