mod common;

use carnot_mbo::flow::{
    a_apply, crandall_liggett, curvature_h0, curvature_h_eps, direct_flow, grad0, resolvent, resolvent_residual,
};
use carnot_mbo::group::{GroupDescriptor, Polynomial};
use carnot_mbo::{Axis, Boundary, Grid, GridFunction, SolverConfig, Window};
use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

/// `0.3x² − 0.2xy + 0.1y² + 0.5z + 0.4xz`
fn test_polynomial() -> Polynomial {
    [([2, 0, 0], 0.3), ([1, 1, 0], -0.2), ([0, 2, 0], 0.1), ([0, 0, 1], 0.5), ([1, 0, 1], 0.4)]
        .iter()
        .fold(Polynomial::zero(3), |acc, (e, c)| acc.add(&Polynomial::monomial(3, e, *c)))
}

/// `h₀` at `p` from exact symbolic derivatives of a polynomial.
fn symbolic_h0(u: &Polynomial, p: &[f64]) -> f64 {
    let x = GroupDescriptor::heisenberg1().horizontal_fields();
    let grad: Vec<f64> = x.iter().map(|f| f.apply(u).eval(p)).collect();
    let q = 1.0 + grad.iter().map(|v| v * v).sum::<f64>();
    let mut c = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let a = if i == j { 1.0 } else { 0.0 } - grad[i] * grad[j] / q;
            c += a * x[i].apply(&x[j].apply(u)).eval(p);
        }
    }
    -c / q.sqrt()
}

fn heisenberg_curvature_error(h: f64, half: usize, u: &dyn Fn(&[f64]) -> f64, oracle: &dyn Fn(&[f64]) -> f64) -> f64 {
    let g = Grid::heisenberg(h, half, 1, (1.6 / (h * h / 2.0)) as usize).unwrap();
    let f = GridFunction::from_fn(&g, u);
    let w = Window::from_bounds(&g, &[(-0.5, 0.5), (-0.5, 0.5), (-0.3, 0.3)]).unwrap();
    let c = curvature_h0(&f, Some(&w)).unwrap();
    w.indices(&g)
        .into_iter()
        .map(|i| (c.h0[i] - oracle(&g.point(i))).abs())
        .fold(0.0, f64::max)
}

/// `h₀` at `p` with every `Xᵢ` applied as a central difference of `u` along
/// `s ↦ p·exp(sXᵢ)`, with a step far below the grid spacing.
fn translated_h0(u: &dyn Fn(&[f64]) -> f64, p: &[f64]) -> f64 {
    let grp = GroupDescriptor::heisenberg1();
    let s = 1e-3;
    let mv = |p: &[f64], i: usize, d: f64| {
        let mut e = vec![0.0; 3];
        e[i] = d;
        grp.multiply(p, &e).unwrap()
    };
    let x = |i: usize, p: &[f64]| (u(&mv(p, i, s)) - u(&mv(p, i, -s))) / (2.0 * s);
    let xx = |i: usize, j: usize| (x(j, &mv(p, i, s)) - x(j, &mv(p, i, -s))) / (2.0 * s);
    let grad = [x(0, p), x(1, p)];
    let q = 1.0 + grad[0] * grad[0] + grad[1] * grad[1];
    let mut c = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let a = if i == j { 1.0 } else { 0.0 } - grad[i] * grad[j] / q;
            c += a * xx(i, j);
        }
    }
    -c / q.sqrt()
}

#[test]
fn heisenberg_curvature_is_exact_on_quadratics() {
    let u = test_polynomial();
    let err = heisenberg_curvature_error(0.1, 10, &|p| u.eval(p), &|p| symbolic_h0(&u, p));
    assert!(err < 1e-10, "{err}");
}

#[test]
fn heisenberg_curvature_converges_at_second_order() {
    let u = |p: &[f64]| (1.3 * p[0]).sin() * (0.7 * p[1]).cos() + 0.5 * (2.0 * p[2]).sin() + 0.3 * p[0] * p[2];
    let oracle = |p: &[f64]| translated_h0(&u, p);
    let coarse = heisenberg_curvature_error(0.1, 10, &u, &oracle);
    let fine = heisenberg_curvature_error(0.05, 20, &u, &oracle);
    assert!(coarse < 1e-2, "{coarse}");
    assert!(fine < 0.3 * coarse, "{coarse} {fine}");
}

#[test]
fn gradient_of_a_paraboloid() {
    let ax = Axis::new(-1.0, 2.0, 40);
    let g = Grid::euclidean2(ax, ax, Boundary::ExtendConstant).unwrap();
    let u = GridFunction::from_fn(&g, |p| p[0] * p[0] + p[1] * p[1]);
    let d = grad0(&u).unwrap();
    let w = Window::interior(&g, 0.1).unwrap();
    for i in w.indices(&g) {
        let p = g.point(i);
        assert!((d[0].values[i] - 2.0 * p[0]).abs() < 1e-12);
        assert!((d[1].values[i] - 2.0 * p[1]).abs() < 1e-12);
    }
}

#[test]
fn line_curvature_matches_closed_form() {
    let g = circle(256);
    let u = GridFunction::from_fn(&g, |p| 0.3 * p[0].sin());
    let c = curvature_h0(&u, None).unwrap();
    let worst = (0..g.len())
        .map(|i| {
            let x = g.point(i)[0];
            let (d1, d2) = (0.3 * x.cos(), -0.3 * x.sin());
            (c.h0[i] + d2 / (1.0 + d1 * d1).powf(1.5)).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-4, "{worst}");
}

#[test]
fn operator_and_curvature_are_tied_by_the_area_factor() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let g = Grid::heisenberg(0.1, 8, 1, 61).unwrap();
    let u = random_heisenberg(&g, &mut rng, 1.0);
    let a = a_apply(&u).unwrap();
    let c = curvature_h0(&u, None).unwrap();
    for i in 0..g.len() {
        assert!((a.values[i] - c.h0[i] * c.area_factor(i)).abs() < 1e-10 * (1.0 + a.values[i].abs()));
    }
}

#[test]
fn h_eps_tends_to_h0() {
    let g = Grid::heisenberg(0.1, 12, 1, 121).unwrap();
    let l = g.axes[0].extent;
    let u = GridFunction::from_fn(&g, |p| {
        0.3 * (TAU * p[0] / l).sin() * (TAU * p[1] / l).cos() + 0.2 * p[2]
    });
    let w = Window::from_bounds(&g, &[(-0.6, 0.6), (-0.6, 0.6), (-0.2, 0.2)]).unwrap();
    let h0 = curvature_h0(&u, None).unwrap().h0;
    let h0 = u.with_values(h0);
    let d: Vec<f64> = [0.5, 0.25, 0.125]
        .iter()
        .map(|&e| w.sup_diff(&curvature_h_eps(&u, e).unwrap(), &h0))
        .collect();
    assert!(d[0] > 0.0 && d[1] < d[0] && d[2] < d[1], "{d:?}");
    assert!(w.sup_diff(&curvature_h_eps(&u, 0.0).unwrap(), &h0) < 1e-14);
}

#[test]
fn affine_graphs_are_flat_for_every_eps() {
    // the vertical stencil reaches 2h in z: keep the window well inside
    let g = Grid::heisenberg(0.1, 8, 1, 121).unwrap();
    let u = GridFunction::from_fn(&g, |p| 0.4 * p[0] - 0.7 * p[1] + 0.2 * p[2] + 1.0);
    let w = Window::from_bounds(&g, &[(-0.4, 0.4), (-0.4, 0.4), (-0.05, 0.05)]).unwrap();
    for e in [0.0, 0.3, 1.0] {
        let h = curvature_h_eps(&u, e).unwrap();
        assert!(w.sup_abs(&g, &h.values) < 1e-10);
    }
}

#[test]
fn direct_flow_decays_the_sine() {
    let g = circle(128);
    let f = GridFunction::from_fn(&g, |p| 0.3 * p[0].sin());
    let norms: Vec<f64> = [0.05, 0.1, 0.2, 0.4]
        .iter()
        .map(|&t| sup_abs(&direct_flow(&f, t, &cfg()).unwrap()))
        .collect();
    assert!(norms[0] < 0.3 && norms.windows(2).all(|w| w[1] < w[0]), "{norms:?}");
}

#[test]
fn direct_flow_preserves_order_on_the_line() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let g = circle(64);
    for _ in 0..5 {
        let f = random_periodic(&g, &mut rng, 1.0);
        let h = f.zip_map(&random_bump(&f, &mut rng, 1.0), |a, b| a + b);
        let (uf, uh) = (direct_flow(&f, 0.05, &cfg()).unwrap(), direct_flow(&h, 0.05, &cfg()).unwrap());
        assert!(uf.values.iter().zip(&uh.values).all(|(a, b)| a <= b));
    }
}

#[test]
fn resolvent_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let g = circle(64);
    let c = GridFunction::constant(&g, 0.42);
    assert_eq!(resolvent(&c, 0.1, &cfg()).unwrap(), c);
    let tol = cfg().resolvent_tol;
    for _ in 0..3 {
        let f = random_periodic(&g, &mut rng, 0.8);
        let h = random_periodic(&g, &mut rng, 0.8);
        let (rf, rh) = (resolvent(&f, 0.05, &cfg()).unwrap(), resolvent(&h, 0.05, &cfg()).unwrap());
        assert!(rf.sup_diff(&rh) <= f.sup_diff(&h) + 2.0 * tol);
        assert!(resolvent_residual(&rf, &f, 0.05).unwrap() <= tol);
    }
    // u = f − λAf + O(λ²)
    let f = GridFunction::from_fn(&g, |p| 0.3 * p[0].sin());
    let af = a_apply(&f).unwrap();
    let err = |lambda: f64| {
        let u = resolvent(&f, lambda, &cfg()).unwrap();
        u.zip_map(&f, |a, b| a - b)
            .zip_map(&af, |d, a| d + lambda * a)
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    };
    let (e1, e2) = (err(0.02), err(0.01));
    assert!(e2 < 0.35 * e1, "{e1} {e2}");
}

#[test]
fn crandall_liggett_basics() {
    let g = circle(64);
    let f = GridFunction::from_fn(&g, |p| 0.3 * p[0].sin());
    assert_eq!(crandall_liggett(&f, 0.05, 1, &cfg()).unwrap(), resolvent(&f, 0.05, &cfg()).unwrap());
    let c = GridFunction::constant(&g, -1.5);
    assert_eq!(crandall_liggett(&c, 0.05, 4, &cfg()).unwrap(), c);
    assert!(crandall_liggett(&f, 0.05, 0, &cfg()).is_err());
}
