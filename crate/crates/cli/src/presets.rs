//! Named analytic initial data and the grids they are sampled on.

use carnot_mbo::{Axis, Grid, GridFunction, GroupKind};

use crate::config::{FlowConfig, PresetParams};
use crate::error::ConfigError;

pub const NAMES: &[&str] = &["constant", "affine", "sine1d", "sine2d", "bump", "heis_z", "heis_plane"];

pub fn check_name(name: &str) -> Result<(), ConfigError> {
    if NAMES.contains(&name) {
        Ok(())
    } else {
        Err(ConfigError::Invalid {
            key: "preset".into(),
            msg: format!("unknown preset '{name}' (one of {})", NAMES.join(", ")),
        })
    }
}

/// The grid described by the config.
pub fn build_grid(cfg: &FlowConfig) -> carnot_mbo::Result<Grid> {
    let g = &cfg.grid;
    match cfg.group {
        GroupKind::Euclidean(1) => Grid::euclidean1(Axis::new(g.origin, g.length, g.n), g.boundary),
        GroupKind::Euclidean(_) => {
            let ax = Axis::new(g.origin, g.length, g.n);
            Grid::euclidean2(ax, ax, g.boundary)
        }
        GroupKind::Heisenberg1 => Grid::heisenberg(g.length / g.n as f64, g.n / 2, g.q, g.nz),
    }
}

fn invalid(msg: String) -> ConfigError {
    ConfigError::Invalid {
        key: "preset".into(),
        msg,
    }
}

/// Smooth compactly supported profile: `exp(1 − 1/(1 − s²))` on `|s| < 1`.
fn bump_profile(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// Sample the named preset on `grid`; `period` is the wavelength of the sine
/// presets.
pub fn preset_datum(p: &PresetParams, grid: &Grid, period: f64) -> Result<GridFunction, ConfigError> {
    let kind = grid.group.kind;
    let m = grid.group.m;
    let heis = kind == GroupKind::Heisenberg1;
    let k = std::f64::consts::TAU / period;
    let f = match p.name.as_str() {
        "constant" => GridFunction::constant(grid, p.c),
        "affine" => {
            let b = if m > 1 { p.b } else { 0.0 };
            if grid.boundary == carnot_mbo::Boundary::Torus && (p.a != 0.0 || b != 0.0) {
                return Err(invalid("affine data with nonzero slope is not periodic; use extend_constant".into()));
            }
            GridFunction::from_fn(grid, |x| p.c + p.a * x[0] + if m > 1 { b * x[1] } else { 0.0 })
        }
        "sine1d" => GridFunction::from_fn(grid, |x| p.amplitude * (k * x[0]).sin()),
        "sine2d" => {
            if m < 2 {
                return Err(invalid(format!("sine2d needs two horizontal directions, {kind} has one")));
            }
            GridFunction::from_fn(grid, |x| p.amplitude * (k * x[0]).sin() * (k * x[1]).sin())
        }
        "bump" => {
            let g = &grid.group;
            GridFunction::from_fn(grid, |x| {
                let r = g.hnorm0(x).expect("point has the group dimension");
                p.c + p.amplitude * bump_profile(r / p.radius)
            })
        }
        "heis_z" | "heis_plane" if !heis => {
            return Err(invalid(format!("{} is defined on heisenberg1 only", p.name)));
        }
        "heis_z" => GridFunction::from_fn(grid, |x| x[2]),
        "heis_plane" => GridFunction::from_fn(grid, |x| p.a * x[0] + p.b * x[1] + p.c),
        other => return Err(invalid(format!("unknown preset '{other}'"))),
    };
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use carnot_mbo::flow::curvature_h0;
    use carnot_mbo::Window;

    fn datum(sets: &[&str]) -> GridFunction {
        let over: Vec<String> = sets.iter().map(|s| s.to_string()).collect();
        let cfg = parse_config(None, &over).unwrap();
        let g = build_grid(&cfg).unwrap();
        preset_datum(&cfg.preset, &g, cfg.grid.length).unwrap()
    }

    #[test]
    fn constant_preset() {
        let f = datum(&["preset=constant", "preset.c=0.5"]);
        assert!(f.values.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn sine1d_on_two_pi() {
        let f = datum(&["preset=sine1d", "preset.amplitude=0.3"]);
        for (i, v) in f.values.iter().enumerate() {
            let x = f.grid.point(i)[0];
            assert!((v - 0.3 * x.sin()).abs() < 1e-14);
        }
    }

    #[test]
    fn heis_z_has_zero_curvature_inside() {
        let f = datum(&["group=heisenberg1", "preset=heis_z", "grid.n=16", "grid.length=1.6", "grid.nz=81"]);
        // the stencil moves z by up to |x|·h at the window edge: keep 0.1 from the z faces
        let w = Window::from_bounds(&f.grid, &[(-0.5, 0.5), (-0.5, 0.5), (-0.1, 0.1)]).unwrap();
        let c = curvature_h0(&f, Some(&w)).unwrap();
        let worst = w.indices(&f.grid).into_iter().map(|i| c.h0[i].abs()).fold(0.0, f64::max);
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn bump_is_a_compact_perturbation() {
        let f = datum(&["group=euclidean2", "preset=bump", "preset.c=1", "grid.origin=-3.14"]);
        assert!(f.values.iter().all(|&v| (1.0..=1.3 + 1e-12).contains(&v)));
        assert!(f.max() > 1.29);
        let far = f.grid.nearest(&[2.5, 2.5]);
        assert_eq!(f.values[far], 1.0);
    }

    #[test]
    fn group_mismatch_is_reported() {
        let cfg = parse_config(None, &["preset=heis_z".into()]).unwrap();
        let g = build_grid(&cfg).unwrap();
        assert!(preset_datum(&cfg.preset, &g, 1.0).is_err());
        let cfg = parse_config(None, &["preset=affine".into()]).unwrap();
        let g = build_grid(&cfg).unwrap();
        assert!(preset_datum(&cfg.preset, &g, 1.0).is_err());
    }
}
