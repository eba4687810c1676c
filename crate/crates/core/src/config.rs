use crate::error::{Error, Result};

/// Numerical knobs shared by the solvers.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Fraction of the explicit stability bound used as time step, in (0, 1).
    pub cfl_safety: f64,
    /// Minimum number of threshold levels.
    pub levels: usize,
    /// Tolerance of the threshold root finder, in level units.
    pub root_tol: f64,
    /// Sup-norm residual at which the resolvent relaxation stops.
    pub resolvent_tol: f64,
    pub max_iter: usize,
    /// Riemannian regularisation ε of the heat operator (0 = sub-Riemannian).
    pub eps: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cfl_safety: 0.5,
            levels: 33,
            root_tol: 1e-8,
            resolvent_tol: 1e-7,
            max_iter: 2_000_000,
            eps: 0.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_safety > 0.0 && self.cfl_safety < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "cfl_safety must lie in (0,1), got {}",
                self.cfl_safety
            )));
        }
        if self.levels < 4 {
            return Err(Error::InvalidArgument(format!(
                "need at least 4 levels, got {}",
                self.levels
            )));
        }
        if !(self.root_tol > 0.0) || !(self.resolvent_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::InvalidArgument(format!("ε must be ≥ 0, got {}", self.eps)));
        }
        Ok(())
    }
}
