//! Batch front-end for the carnot-mbo solvers: config parsing, preset data,
//! and the validation suites with their on-disk artifacts.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod suites;

use std::fs;
use std::path::Path;

use carnot_mbo::heat::{escaping_mass, KERNEL_TAIL_TOL};
use carnot_mbo::{io, DiagnosticsReport, Grid};

pub use config::{parse_config, FlowConfig};
pub use error::{CliError, ConfigError};
pub use suites::Suite;

pub struct Outcome {
    pub report: DiagnosticsReport,
    pub manifest: std::path::PathBuf,
}

/// Smallest vertical count from `cfg.grid.nz` up (in steps of 16) whose box
/// holds the kernel at `run.t` for every ε the kernel suite evaluates.
fn kernel_nz(cfg: &FlowConfig) -> carnot_mbo::Result<usize> {
    let g = &cfg.grid;
    let h = g.length / g.n as f64;
    let eps = cfg.eps.iter().copied().fold(cfg.solver.eps, f64::max);
    let mut nz = g.nz | 1;
    let mut prev = f64::INFINITY;
    loop {
        let grid = Grid::heisenberg(h, g.n / 2, g.q, nz)?;
        let tail = escaping_mass(&grid, eps, cfg.t);
        // stop once the box holds the kernel, or once the horizontal tail
        // dominates and a taller box no longer helps
        if tail <= 0.1 * KERNEL_TAIL_TOL || tail > 0.999 * prev {
            return Ok(nz);
        }
        prev = tail;
        nz += 16;
    }
}

/// Load the datum, run one suite and write its artifacts and manifest.
pub fn execute(suite: Suite, cfg: &FlowConfig) -> Result<Outcome, CliError> {
    let mut cfg = cfg.clone();
    if suite == Suite::Kernel && cfg.grid.nz_auto {
        cfg.grid.nz = kernel_nz(&cfg)?;
        cfg.set_resolved("grid.nz", cfg.grid.nz.to_string(), "default, sized for the kernel");
    }
    let cfg = &cfg;
    let echo = cfg.echo();
    // inputs of the run: the suite, the resolved config without provenance
    // comments or the output directory, and the bytes of an input dump
    let mut inputs = format!("suite = {}\n", suite.name()).into_bytes();
    for line in echo.lines().filter(|l| !l.starts_with("run.outdir ")) {
        inputs.extend_from_slice(line.split("  #").next().unwrap_or(line).as_bytes());
        inputs.push(b'\n');
    }
    let (datum, source) = match &cfg.input {
        Some(p) => {
            let bytes = fs::read(p).map_err(|source| CliError::Read {
                path: p.display().to_string(),
                source,
            })?;
            let f = io::read_dump(&bytes[..], cfg.grid.boundary)?;
            if f.grid.group.kind != cfg.group {
                return Err(ConfigError::Invalid {
                    key: "input".into(),
                    msg: format!("dump holds a {} field but group is {}", f.grid.group.kind, cfg.group),
                }
                .into());
            }
            log::info!("datum read from {}; grid.* keys other than boundary are ignored", p.display());
            inputs.extend_from_slice(&bytes);
            (f, format!("dump {} ({} bytes)", p.display(), bytes.len()))
        }
        None => {
            let grid = presets::build_grid(cfg)?;
            let f = presets::preset_datum(&cfg.preset, &grid, cfg.grid.length)?;
            (f, format!("preset {}", cfg.preset.name))
        }
    };
    let mut out = output::RunDir::create(&cfg.outdir, &inputs)?;
    log::info!("{} suite, run {} in {}", suite.name(), out.tag(), cfg.outdir.display());
    let report = suites::run(suite, cfg, &datum, &mut out)?;
    let header = format!(
        "suite = {}\nversion = {}\ndatum = {}\nnodes = {}\n",
        suite.name(),
        env!("CARGO_PKG_VERSION"),
        source,
        datum.grid.len()
    );
    let manifest = out.finish(&header, &echo, &report)?;
    Ok(Outcome { report, manifest })
}

/// Read a config file (if any) and apply the overrides.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<FlowConfig, CliError> {
    let text = match path {
        Some(p) => Some(fs::read_to_string(p).map_err(|source| CliError::Read {
            path: p.display().to_string(),
            source,
        })?),
        None => None,
    };
    Ok(parse_config(text.as_deref(), overrides)?)
}
