use super::{check_inputs, FixedPointSolver, SolveResult, SolverConfig};
use crate::cell::EquilibriumCell;
use crate::error::{Error, Result};
use crate::linalg::{self, Vector};

/// Plain fixed-point iteration `z ← f(z; x)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Picard;

impl FixedPointSolver for Picard {
    fn name(&self) -> &'static str {
        "picard"
    }

    fn solve(&self, cell: &EquilibriumCell, x: &Vector, z0: &Vector, cfg: &SolverConfig) -> Result<SolveResult> {
        picard_solve(cell, x, z0, cfg)
    }
}

pub fn picard_solve(cell: &EquilibriumCell, x: &Vector, z0: &Vector, cfg: &SolverConfig) -> Result<SolveResult> {
    check_inputs(cell, x, z0, cfg)?;
    if cfg.max_iters == 0 {
        return Ok(SolveResult::unstarted(z0));
    }
    let inj = cell.injection(x);
    // f(z) of the current iterate is both the next iterate and the term
    // needed for the residual, so each step costs one cell evaluation.
    let mut next = cell.apply_injected(z0, &inj);
    let mut z = z0.as_slice().to_vec();
    let mut trace = Vec::with_capacity(cfg.max_iters);
    let mut converged = false;
    for step in 1..=cfg.max_iters {
        z = next;
        next = cell.apply_injected(&z, &inj);
        let r = linalg::sq_distance_raw(&next, &z).sqrt();
        if !r.is_finite() {
            return Err(Error::Divergence { step, residual: r });
        }
        trace.push(r);
        if r <= cfg.tol_abs {
            converged = true;
            break;
        }
    }
    Ok(SolveResult {
        z: Vector::from_raw(z),
        iterations: trace.len(),
        residual_trace: trace,
        converged,
    })
}
