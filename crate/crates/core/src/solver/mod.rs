//! Fixed-point solvers for `z = f(z; x)`.
//!
//! Each method implements [`FixedPointSolver`] and is looked up by name
//! through a [`SolverRegistry`]; [`SolverMethod`] selects one of the
//! built-ins from configuration.

mod broyden;
mod picard;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use broyden::{broyden_solve, Broyden};
pub use picard::{picard_solve, Picard};

use crate::cell::EquilibriumCell;
use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Default iteration budget for standalone solves.
pub const DEFAULT_MAX_ITERS: usize = 26;
pub const REFERENCE_TOL: f64 = 1e-10;
pub const REFERENCE_MAX_ITERS: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMethod {
    Picard,
    Broyden,
}

impl SolverMethod {
    pub fn name(self) -> &'static str {
        match self {
            SolverMethod::Picard => "picard",
            SolverMethod::Broyden => "broyden",
        }
    }

    pub fn solver(self) -> &'static dyn FixedPointSolver {
        match self {
            SolverMethod::Picard => &Picard,
            SolverMethod::Broyden => &Broyden,
        }
    }
}

impl fmt::Display for SolverMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "picard" => Ok(SolverMethod::Picard),
            "broyden" => Ok(SolverMethod::Broyden),
            _ => Err(Error::UnknownName {
                kind: "solver",
                name: s.into(),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub max_iters: usize,
    /// Stop once the residual norm is at or below this. Zero forces exactly
    /// `max_iters` steps unless an exact fixed point is hit.
    pub tol_abs: f64,
    /// Maximum stored Broyden update pairs; the oldest is dropped on overflow.
    pub broyden_memory: usize,
}

impl SolverConfig {
    /// Config with Broyden memory equal to the iteration budget.
    pub fn new(method: SolverMethod, max_iters: usize, tol_abs: f64) -> Self {
        SolverConfig {
            method,
            max_iters,
            tol_abs,
            broyden_memory: max_iters.max(1),
        }
    }

    pub fn with_memory(mut self, memory: usize) -> Self {
        self.broyden_memory = memory;
        self
    }

    /// Same method, tolerance and memory with a different budget.
    pub fn with_budget(self, max_iters: usize) -> Self {
        SolverConfig { max_iters, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol_abs.is_finite() && self.tol_abs >= 0.0) {
            return Err(Error::InvalidParameter(format!("tol_abs must be >= 0, got {}", self.tol_abs)));
        }
        if self.broyden_memory == 0 {
            return Err(Error::InvalidParameter("broyden_memory must be >= 1".into()));
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::new(SolverMethod::Broyden, DEFAULT_MAX_ITERS, 1e-6)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub z: Vector,
    pub iterations: usize,
    /// `‖f(z) − z‖` after every step.
    pub residual_trace: Vec<f64>,
    pub converged: bool,
}

impl SolveResult {
    pub(crate) fn unstarted(z0: &Vector) -> Self {
        SolveResult {
            z: z0.clone(),
            iterations: 0,
            residual_trace: Vec::new(),
            converged: false,
        }
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.residual_trace.last().copied()
    }
}

/// A fixed-point method. Implementations must be deterministic: identical
/// inputs produce bitwise-identical results.
pub trait FixedPointSolver: Send + Sync {
    fn name(&self) -> &'static str;

    fn solve(
        &self,
        cell: &EquilibriumCell,
        x: &Vector,
        z0: &Vector,
        cfg: &SolverConfig,
    ) -> Result<SolveResult>;
}

/// Name-keyed collection of solvers.
pub struct SolverRegistry {
    solvers: BTreeMap<&'static str, Box<dyn FixedPointSolver>>,
}

impl SolverRegistry {
    pub fn empty() -> Self {
        SolverRegistry {
            solvers: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut reg = SolverRegistry::empty();
        reg.register(Box::new(Picard));
        reg.register(Box::new(Broyden));
        reg
    }

    /// Adds a solver, replacing any previous entry of the same name.
    pub fn register(&mut self, solver: Box<dyn FixedPointSolver>) {
        self.solvers.insert(solver.name(), solver);
    }

    pub fn get(&self, name: &str) -> Result<&dyn FixedPointSolver> {
        self.solvers
            .get(name)
            .map(|s| s.as_ref())
            .ok_or_else(|| Error::UnknownName {
                kind: "solver",
                name: name.into(),
            })
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.solvers.keys().copied()
    }
}

impl Default for SolverRegistry {
    fn default() -> Self {
        SolverRegistry::builtin()
    }
}

/// Dispatches on `cfg.method`.
pub fn solve(cell: &EquilibriumCell, x: &Vector, z0: &Vector, cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.method.solver().solve(cell, x, z0, cfg)
}

/// Converged fixed point used as ground truth: Broyden from zeros with
/// `tol_abs = 1e-10` and at most 512 steps.
pub fn reference_fixed_point(cell: &EquilibriumCell, x: &Vector) -> Result<Vector> {
    let cfg = SolverConfig::new(SolverMethod::Broyden, REFERENCE_MAX_ITERS, REFERENCE_TOL);
    let res = broyden_solve(cell, x, &Vector::zeros(cell.dz()), &cfg)?;
    if !res.converged {
        return Err(Error::NotConverged {
            iterations: res.iterations,
            residual: res.final_residual().unwrap_or(f64::NAN),
        });
    }
    Ok(res.z)
}

pub(crate) fn check_inputs(cell: &EquilibriumCell, x: &Vector, z0: &Vector, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    cell.check_dims(z0, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::{make_random_cell, scalar_cell, ActivationKind};
    use crate::linalg::{l2_norm, sq_distance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> Vector {
        Vector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn dispatch_matches_direct_calls() {
        let cell = make_random_cell(1, 8, 3, 0.9, ActivationKind::Tanh).unwrap();
        let x = Vector::standard_normal(3, &mut ChaCha8Rng::seed_from_u64(2));
        let z0 = Vector::zeros(8);
        for method in [SolverMethod::Picard, SolverMethod::Broyden] {
            let cfg = SolverConfig::new(method, 10, 0.0);
            let direct = match method {
                SolverMethod::Picard => picard_solve(&cell, &x, &z0, &cfg).unwrap(),
                SolverMethod::Broyden => broyden_solve(&cell, &x, &z0, &cfg).unwrap(),
            };
            assert_eq!(solve(&cell, &x, &z0, &cfg).unwrap(), direct);
            let by_name = SolverRegistry::builtin().get(method.name()).unwrap().solve(&cell, &x, &z0, &cfg).unwrap();
            assert_eq!(by_name, direct);
        }
    }

    #[test]
    fn zero_budget_returns_start() {
        let cell = scalar_cell(0.5, 1.0, 0.0, ActivationKind::Identity);
        for method in [SolverMethod::Picard, SolverMethod::Broyden] {
            let res = solve(&cell, &v(&[2.0]), &v(&[1.5]), &SolverConfig::new(method, 0, 1e-6)).unwrap();
            assert_eq!(res.z, v(&[1.5]));
            assert_eq!(res.iterations, 0);
            assert!(res.residual_trace.is_empty());
            assert!(!res.converged);
        }
    }

    #[test]
    fn registry_lookup() {
        let reg = SolverRegistry::builtin();
        assert_eq!(reg.names().collect::<Vec<_>>(), ["broyden", "picard"]);
        assert!(matches!(reg.get("anderson"), Err(Error::UnknownName { .. })));
        assert!("newton".parse::<SolverMethod>().is_err());
    }

    #[test]
    fn reference_matches_analytic_on_identity_cells() {
        for seed in 0..5 {
            let cell = make_random_cell(seed, 12, 4, 0.9, ActivationKind::Identity).unwrap();
            let x = Vector::standard_normal(4, &mut ChaCha8Rng::seed_from_u64(seed + 50));
            let zr = reference_fixed_point(&cell, &x).unwrap();
            let za = cell.analytic_fixed_point(&x).unwrap();
            for (a, b) in zr.iter().zip(za.iter()) {
                assert!((a - b).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn reference_postcondition_and_determinism() {
        for seed in 0..10 {
            let cell = make_random_cell(seed, 64, 16, 0.9, ActivationKind::Tanh).unwrap();
            let x = Vector::standard_normal(16, &mut ChaCha8Rng::seed_from_u64(seed));
            let z = reference_fixed_point(&cell, &x).unwrap();
            assert!(l2_norm(&cell.residual(&z, &x).unwrap()) <= 1e-10);
            let again = reference_fixed_point(&cell, &x).unwrap();
            assert_eq!(sq_distance(&z, &again).unwrap(), 0.0);
            assert_eq!(z, again);
        }
    }

    #[test]
    fn rejects_negative_tolerance() {
        let cell = scalar_cell(0.5, 1.0, 0.0, ActivationKind::Identity);
        let cfg = SolverConfig::new(SolverMethod::Picard, 3, -1.0);
        assert!(solve(&cell, &v(&[1.0]), &v(&[0.0]), &cfg).is_err());
        let cfg = SolverConfig::new(SolverMethod::Broyden, 3, 0.0).with_memory(0);
        assert!(solve(&cell, &v(&[1.0]), &v(&[0.0]), &cfg).is_err());
    }
}
