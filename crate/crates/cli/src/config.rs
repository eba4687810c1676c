//! Run configuration: flat `key = value` text with dotted sections.
//!
//! ```text
//! group = heisenberg1
//! preset = sine2d
//!
//! [grid]
//! n = 72          # same as grid.n = 72
//! ```
//!
//! Every key has a default. Values named `auto` are resolved against the
//! group when the config is validated, and the resolved values are what the
//! manifest echoes.

use std::collections::BTreeMap;
use std::path::PathBuf;

use carnot_mbo::{Boundary, GroupKind, SolverConfig};

use crate::error::ConfigError;

/// Known keys with their defaults, in echo order.
const KEYS: &[(&str, &str)] = &[
    ("group", "euclidean1"),
    ("preset", "sine"),
    ("input", ""),
    ("grid.boundary", "auto"),
    ("grid.n", "auto"),
    ("grid.length", "auto"),
    ("grid.origin", "auto"),
    ("grid.nz", "auto"),
    ("grid.q", "1"),
    ("solver.cfl_safety", "0.5"),
    ("solver.levels", "33"),
    ("solver.root_tol", "1e-8"),
    ("solver.resolvent_tol", "1e-7"),
    ("solver.max_iter", "2000000"),
    ("solver.eps", "0"),
    ("preset.amplitude", "auto"),
    ("preset.c", "0"),
    ("preset.a", "0.3"),
    ("preset.b", "-0.2"),
    ("preset.radius", "1"),
    ("run.t", "0.05"),
    ("run.times", "0.04,0.02,0.01"),
    ("run.j", "2,4,8"),
    ("run.eps", ""),
    ("run.margin", "4"),
    ("run.window", "auto"),
    ("run.pairs", "20"),
    ("run.seed", "0"),
    ("run.outdir", "out"),
];

pub const MIN_COUNT: usize = 16;
pub const MIN_MARGIN: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindowMode {
    Full,
    Interior,
    Horizontal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub boundary: Boundary,
    /// Nodes per horizontal axis (Euclidean) or horizontal intervals (ℍ¹).
    pub n: usize,
    pub length: f64,
    /// Lower corner of Euclidean boxes; ℍ¹ boxes are centred.
    pub origin: f64,
    pub nz: usize,
    /// `nz` was left at `auto`; suites that need a taller box may resize it.
    pub nz_auto: bool,
    pub q: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PresetParams {
    pub name: String,
    pub amplitude: f64,
    pub c: f64,
    pub a: f64,
    pub b: f64,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    pub group: GroupKind,
    pub input: Option<PathBuf>,
    pub grid: GridSpec,
    pub solver: SolverConfig,
    pub preset: PresetParams,
    pub t: f64,
    pub times: Vec<f64>,
    pub j: Vec<usize>,
    pub eps: Vec<f64>,
    pub margin: f64,
    pub window: WindowMode,
    pub pairs: usize,
    pub seed: u64,
    pub outdir: PathBuf,
    echo: Vec<(String, String)>,
}

/// Raw `key → (value, line)` pairs; line 0 marks a command-line override.
type Raw = BTreeMap<String, (String, usize)>;

fn is_known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

fn parse_text(text: &str, raw: &mut Raw) -> Result<(), ConfigError> {
    let mut section = String::new();
    let mut seen = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Parse {
                line: lineno,
                msg: format!("unterminated section header '{line}'"),
            })?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
            line: lineno,
            msg: format!("expected 'key = value', found '{line}'"),
        })?;
        let k = k.trim();
        let key = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
        if !is_known(&key) {
            return Err(ConfigError::UnknownKey { key, line: Some(lineno) });
        }
        if let Some(prev) = seen.insert(key.clone(), lineno) {
            return Err(ConfigError::Parse {
                line: lineno,
                msg: format!("'{key}' already set on line {prev}"),
            });
        }
        raw.insert(key, (unquote(v.trim()).to_string(), lineno));
    }
    Ok(())
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v)
}

fn parse_override(s: &str, raw: &mut Raw) -> Result<(), ConfigError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| ConfigError::BadOverride(s.to_string()))?;
    let key = k.trim().to_string();
    if !is_known(&key) {
        return Err(ConfigError::UnknownKey { key, line: None });
    }
    raw.insert(key, (unquote(v.trim()).to_string(), 0));
    Ok(())
}

/// Typed access to the merged key table.
struct Values {
    raw: Raw,
}

impl Values {
    fn str(&self, key: &str) -> &str {
        match self.raw.get(key) {
            Some((v, _)) => v,
            None => KEYS.iter().find(|(k, _)| *k == key).map(|(_, d)| *d).unwrap_or(""),
        }
    }

    fn is_auto(&self, key: &str) -> bool {
        self.str(key) == "auto"
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        let v = self.str(key);
        v.parse().map_err(|_| invalid(key, format!("cannot parse '{v}'")))
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>, ConfigError> {
        let v = self.str(key);
        if v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| invalid(key, format!("cannot parse list entry '{}'", s.trim())))
            })
            .collect()
    }
}

fn invalid(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        msg: msg.into(),
    }
}

fn parse_group(v: &str) -> Result<GroupKind, ConfigError> {
    match v {
        "euclidean1" => Ok(GroupKind::Euclidean(1)),
        "euclidean2" => Ok(GroupKind::Euclidean(2)),
        "heisenberg1" => Ok(GroupKind::Heisenberg1),
        other => Err(invalid(
            "group",
            format!("unknown group '{other}' (euclidean1, euclidean2, heisenberg1)"),
        )),
    }
}

fn fmt_list<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Build a validated config from optional file text and `key=value` overrides
/// (applied in order, later ones win).
pub fn parse_config(text: Option<&str>, overrides: &[String]) -> Result<FlowConfig, ConfigError> {
    let mut raw = Raw::new();
    if let Some(t) = text {
        parse_text(t, &mut raw)?;
    }
    for o in overrides {
        parse_override(o, &mut raw)?;
    }
    let v = Values { raw };

    let group = parse_group(v.str("group"))?;
    let heis = group == GroupKind::Heisenberg1;

    let boundary = if v.is_auto("grid.boundary") {
        if heis { Boundary::ExtendConstant } else { Boundary::Torus }
    } else {
        v.parse::<Boundary>("grid.boundary")?
    };
    if heis && boundary == Boundary::Torus {
        return Err(invalid("grid.boundary", "heisenberg1 needs extend_constant"));
    }
    let n: usize = if v.is_auto("grid.n") {
        match group {
            GroupKind::Euclidean(1) => 512,
            GroupKind::Euclidean(_) => 128,
            GroupKind::Heisenberg1 => 72,
        }
    } else {
        v.parse("grid.n")?
    };
    if n < MIN_COUNT {
        return Err(invalid("grid.n", format!("grid count {n} is below {MIN_COUNT}")));
    }
    if heis && !n.is_multiple_of(2) {
        return Err(invalid("grid.n", "heisenberg1 needs an even number of intervals"));
    }
    let length: f64 = if v.is_auto("grid.length") {
        if heis { 3.6 } else { std::f64::consts::TAU }
    } else {
        v.parse("grid.length")?
    };
    if !(length > 0.0 && length.is_finite()) {
        return Err(invalid("grid.length", "must be positive"));
    }
    let origin: f64 = if v.is_auto("grid.origin") {
        if heis { -length / 2.0 } else { 0.0 }
    } else if heis {
        return Err(invalid("grid.origin", "heisenberg1 boxes are centred; leave this at auto"));
    } else {
        v.parse("grid.origin")?
    };
    let nz: usize = if v.is_auto("grid.nz") {
        if heis { 33 } else { 0 }
    } else if !heis {
        return Err(invalid("grid.nz", "only heisenberg1 has a vertical axis"));
    } else {
        v.parse("grid.nz")?
    };
    if heis && nz < MIN_COUNT {
        return Err(invalid("grid.nz", format!("grid count {nz} is below {MIN_COUNT}")));
    }
    let q: usize = v.parse("grid.q")?;
    if q == 0 {
        return Err(invalid("grid.q", "must be ≥ 1"));
    }

    let solver = SolverConfig {
        cfl_safety: v.parse("solver.cfl_safety")?,
        levels: v.parse("solver.levels")?,
        root_tol: v.parse("solver.root_tol")?,
        resolvent_tol: v.parse("solver.resolvent_tol")?,
        max_iter: v.parse("solver.max_iter")?,
        eps: v.parse("solver.eps")?,
    };
    if !(solver.cfl_safety > 0.0 && solver.cfl_safety < 1.0) {
        return Err(invalid("solver.cfl_safety", "must lie in (0, 1)"));
    }
    if solver.levels < 4 {
        return Err(invalid("solver.levels", "need at least 4 levels"));
    }
    for (key, tol) in [("solver.root_tol", solver.root_tol), ("solver.resolvent_tol", solver.resolvent_tol)] {
        if !(tol > 0.0) {
            return Err(invalid(key, "tolerances must be positive"));
        }
    }
    if !(solver.eps >= 0.0) {
        return Err(invalid("solver.eps", "must be ≥ 0"));
    }

    let mut name = v.str("preset").to_string();
    if name == "sine" {
        name = if group == GroupKind::Euclidean(1) { "sine1d" } else { "sine2d" }.into();
    }
    crate::presets::check_name(&name)?;
    let amplitude: f64 = if v.is_auto("preset.amplitude") {
        match name.as_str() {
            "sine2d" => 0.2,
            _ => 0.3,
        }
    } else {
        v.parse("preset.amplitude")?
    };
    let preset = PresetParams {
        name,
        amplitude,
        c: v.parse("preset.c")?,
        a: v.parse("preset.a")?,
        b: v.parse("preset.b")?,
        radius: v.parse("preset.radius")?,
    };
    if !(preset.radius > 0.0) {
        return Err(invalid("preset.radius", "must be positive"));
    }
    let input = match v.str("input") {
        "" => None,
        p => Some(PathBuf::from(p)),
    };

    let t: f64 = v.parse("run.t")?;
    if !(t > 0.0) {
        return Err(invalid("run.t", "must be positive"));
    }
    let times: Vec<f64> = v.list("run.times")?;
    if times.iter().any(|&s| !(s > 0.0)) || times.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid("run.times", "must be positive and strictly decreasing"));
    }
    let j: Vec<usize> = v.list("run.j")?;
    if j.is_empty() || j.contains(&0) || j.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("run.j", "must be a non-empty increasing list of positive integers"));
    }
    let eps: Vec<f64> = v.list("run.eps")?;
    if eps.iter().any(|&e| !(e > 0.0)) || eps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid("run.eps", "must be positive and strictly decreasing"));
    }
    let margin: f64 = v.parse("run.margin")?;
    if !(margin >= MIN_MARGIN) {
        return Err(invalid("run.margin", format!("margin factor must be ≥ {MIN_MARGIN}")));
    }
    let window = match v.str("run.window") {
        "auto" if boundary == Boundary::Torus => WindowMode::Full,
        "auto" if heis => WindowMode::Horizontal,
        "auto" | "interior" => WindowMode::Interior,
        "full" => WindowMode::Full,
        "horizontal" => WindowMode::Horizontal,
        other => {
            return Err(invalid(
                "run.window",
                format!("unknown window '{other}' (auto, full, interior, horizontal)"),
            ))
        }
    };
    let pairs: usize = v.parse("run.pairs")?;
    if pairs == 0 {
        return Err(invalid("run.pairs", "must be ≥ 1"));
    }
    let seed: u64 = v.parse("run.seed")?;
    let outdir = PathBuf::from(v.str("run.outdir"));
    if outdir.as_os_str().is_empty() {
        return Err(invalid("run.outdir", "must not be empty"));
    }

    let window_name = match window {
        WindowMode::Full => "full",
        WindowMode::Interior => "interior",
        WindowMode::Horizontal => "horizontal",
    };
    let mut cfg = FlowConfig {
        group,
        input,
        grid: GridSpec {
            boundary,
            n,
            length,
            origin,
            nz,
            nz_auto: heis && v.is_auto("grid.nz"),
            q,
        },
        solver,
        preset,
        t,
        times,
        j,
        eps,
        margin,
        window,
        pairs,
        seed,
        outdir,
        echo: Vec::new(),
    };
    let resolved: Vec<(&str, String)> = vec![
        ("group", group.to_string()),
        ("preset", cfg.preset.name.clone()),
        ("input", v.str("input").to_string()),
        ("grid.boundary", boundary.to_string()),
        ("grid.n", n.to_string()),
        ("grid.length", length.to_string()),
        ("grid.origin", if heis { "centred".into() } else { origin.to_string() }),
        ("grid.nz", if heis { nz.to_string() } else { "none".into() }),
        ("grid.q", q.to_string()),
        ("solver.cfl_safety", cfg.solver.cfl_safety.to_string()),
        ("solver.levels", cfg.solver.levels.to_string()),
        ("solver.root_tol", cfg.solver.root_tol.to_string()),
        ("solver.resolvent_tol", cfg.solver.resolvent_tol.to_string()),
        ("solver.max_iter", cfg.solver.max_iter.to_string()),
        ("solver.eps", cfg.solver.eps.to_string()),
        ("preset.amplitude", amplitude.to_string()),
        ("preset.c", cfg.preset.c.to_string()),
        ("preset.a", cfg.preset.a.to_string()),
        ("preset.b", cfg.preset.b.to_string()),
        ("preset.radius", cfg.preset.radius.to_string()),
        ("run.t", t.to_string()),
        ("run.times", fmt_list(&cfg.times)),
        ("run.j", fmt_list(&cfg.j)),
        ("run.eps", fmt_list(&cfg.eps)),
        ("run.margin", margin.to_string()),
        ("run.window", window_name.into()),
        ("run.pairs", pairs.to_string()),
        ("run.seed", seed.to_string()),
        ("run.outdir", cfg.outdir.display().to_string()),
    ];
    debug_assert_eq!(resolved.len(), KEYS.len());
    cfg.echo = resolved
        .into_iter()
        .map(|(k, val)| {
            let origin = match v.raw.get(k) {
                Some((_, 0)) => "set",
                Some(_) => "file",
                None => "default",
            };
            (k.to_string(), format!("{val}  # {origin}"))
        })
        .collect();
    Ok(cfg)
}

impl FlowConfig {
    /// Resolved `key = value` lines, each tagged with where the value came from.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.echo {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(v);
            s.push('\n');
        }
        s
    }

    /// Replace the echoed value of `key` after a suite-specific resolution.
    pub fn set_resolved(&mut self, key: &str, value: String, note: &str) {
        if let Some(e) = self.echo.iter_mut().find(|(k, _)| k == key) {
            e.1 = format!("{value}  # {note}");
        }
    }

    /// Largest time any suite evaluates, for the boundary margin.
    pub fn t_max(&self) -> f64 {
        self.times.iter().copied().fold(self.t, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config(Some("group = euclidean1\npreset = sine\n"), &[]).unwrap();
        assert_eq!(cfg.preset.name, "sine1d");
        assert_eq!(cfg.grid.n, 512);
        assert_eq!(cfg.solver, SolverConfig::default());
        assert_eq!(cfg.margin, 4.0);
        let echo = cfg.echo();
        assert_eq!(echo.lines().count(), KEYS.len());
        assert!(echo.contains("solver.root_tol = 0.00000001  # default"));
        assert!(echo.contains("group = euclidean1  # file"));
    }

    #[test]
    fn sections_and_dotted_keys_agree() {
        let a = parse_config(Some("[grid]\nn = 64\n[run]\nseed = 3\n"), &[]).unwrap();
        let b = parse_config(Some("grid.n = 64\nrun.seed = 3 # comment\n"), &[]).unwrap();
        assert_eq!(a.grid, b.grid);
        assert_eq!(a.seed, 3);
    }

    #[test]
    fn small_grid_count_is_rejected() {
        let e = parse_config(Some("grid.n = 8\n"), &[]).unwrap_err();
        assert!(matches!(&e, ConfigError::Invalid { key, .. } if key == "grid.n"), "{e}");
    }

    #[test]
    fn unknown_key_is_named() {
        let e = parse_config(Some("group = euclidean1\nfoo = 1\n"), &[]).unwrap_err();
        assert!(matches!(&e, ConfigError::UnknownKey { key, line: Some(2) } if key == "foo"));
        assert!(e.to_string().contains("foo"));
        let e = parse_config(None, &["run.foo=1".into()]).unwrap_err();
        assert!(e.to_string().contains("run.foo"));
    }

    #[test]
    fn invariants_carry_key_names() {
        for (set, key) in [
            ("run.margin=1.5", "run.margin"),
            ("solver.root_tol=0", "solver.root_tol"),
            ("solver.resolvent_tol=-1", "solver.resolvent_tol"),
            ("run.j=4,2", "run.j"),
            ("grid.nz=8", "grid.nz"),
        ] {
            let over = if key == "grid.nz" {
                vec!["group=heisenberg1".to_string(), set.to_string()]
            } else {
                vec![set.to_string()]
            };
            let e = parse_config(None, &over).unwrap_err();
            assert!(e.to_string().contains(key), "{set}: {e}");
        }
    }

    #[test]
    fn overrides_win_and_parse_errors_carry_lines() {
        let cfg = parse_config(Some("run.seed = 1\n"), &["run.seed=9".into()]).unwrap();
        assert_eq!(cfg.seed, 9);
        assert!(cfg.echo().contains("run.seed = 9  # set"));
        let e = parse_config(Some("group = euclidean1\nnot a pair\n"), &[]).unwrap_err();
        assert!(matches!(e, ConfigError::Parse { line: 2, .. }));
        let e = parse_config(Some("run.seed = 1\nrun.seed = 2\n"), &[]).unwrap_err();
        assert!(matches!(e, ConfigError::Parse { line: 2, .. }));
    }

    #[test]
    fn heisenberg_defaults() {
        let cfg = parse_config(None, &["group=heisenberg1".into(), "preset=heis_z".into()]).unwrap();
        assert_eq!(cfg.grid.boundary, Boundary::ExtendConstant);
        assert_eq!(cfg.window, WindowMode::Horizontal);
        assert!(parse_config(None, &["group=heisenberg1".into(), "grid.boundary=torus".into()]).is_err());
    }
}
