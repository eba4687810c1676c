//! Diffusion-threshold (MBO) approximation of horizontal mean curvature flow
//! of graphs over Carnot groups.
//!
//! The crate covers Euclidean ℝ¹, ℝ² and the first Heisenberg group ℍ¹:
//! group algebra ([`group`]), hypoelliptic heat flow on lattice-matched grids
//! ([`heat`]), the threshold operator `H(t)` and its iterates ([`mbo`]), the
//! curvature-flow operator `A` with a direct solver and its resolvent
//! ([`flow`]), and the small-time expansions ([`asymptotics`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod asymptotics;
pub mod config;
pub mod error;
pub mod grid;
pub mod group;
pub mod heat;
pub mod io;
pub mod flow;
pub mod lattice;
pub mod mbo;
pub mod par;
pub mod report;

pub use config::SolverConfig;
pub use error::{Error, Result};
pub use grid::{Axis, Boundary, Grid, GridFunction, Window};
pub use group::{GroupDescriptor, GroupKind};
pub use heat::HeatOperatorSpec;
pub use report::DiagnosticsReport;
