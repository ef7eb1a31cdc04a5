//! Limited-memory "good" Broyden root finding on `g(z) = f(z; x) − z`.
//!
//! The inverse Jacobian estimate is kept in factored form
//! `H = −I + Σ uᵢ vᵢᵀ`. Starting from `H₀ = −I` the first step is exactly a
//! Picard step. Each accepted secant pair adds one rank-one term via
//! Sherman–Morrison:
//!
//! ```text
//! H⁺ = H + (Δz − H·Δg)(Δzᵀ·H) / (Δzᵀ·H·Δg)
//! ```
//!
//! Steps are full (no line search). At most `broyden_memory` pairs are kept;
//! the oldest is dropped first.

use std::collections::VecDeque;

use super::{check_inputs, FixedPointSolver, SolveResult, SolverConfig};
use crate::cell::EquilibriumCell;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Vector};

/// Residual norm beyond which the iteration is declared divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e8;
/// Updates with `|Δzᵀ·H·Δg| < SKIP_RATIO · ‖z‖` are skipped.
pub const SKIP_RATIO: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default)]
pub struct Broyden;

impl FixedPointSolver for Broyden {
    fn name(&self) -> &'static str {
        "broyden"
    }

    fn solve(&self, cell: &EquilibriumCell, x: &Vector, z0: &Vector, cfg: &SolverConfig) -> Result<SolveResult> {
        broyden_solve(cell, x, z0, cfg)
    }
}

struct InverseJacobian {
    pairs: VecDeque<(Vec<f64>, Vec<f64>)>,
    capacity: usize,
}

impl InverseJacobian {
    fn new(capacity: usize) -> Self {
        InverseJacobian {
            pairs: VecDeque::with_capacity(capacity.min(1024)),
            capacity,
        }
    }

    /// `base + Σ uᵢ (vᵢ·w)` where `base` is `−w` scaled into place by the caller.
    fn low_rank(&self, mut base: Vec<f64>, w: &[f64], transpose: bool) -> Vec<f64> {
        for (u, v) in &self.pairs {
            let (left, right) = if transpose { (v, u) } else { (u, v) };
            let c = dot(right, w);
            for (b, l) in base.iter_mut().zip(left) {
                *b += c * l;
            }
        }
        base
    }

    /// `H·w`.
    fn apply(&self, w: &[f64]) -> Vec<f64> {
        self.low_rank(w.iter().map(|x| -x).collect(), w, false)
    }

    /// `Hᵀ·w`.
    fn apply_transpose(&self, w: &[f64]) -> Vec<f64> {
        self.low_rank(w.iter().map(|x| -x).collect(), w, true)
    }

    /// Next iterate `z − H·g`, written as `f(z) − Σ uᵢ (vᵢ·g)` so that with no
    /// stored pairs it is `f(z)` bit for bit.
    fn step(&self, fz: &[f64], g: &[f64]) -> Vec<f64> {
        let mut out = fz.to_vec();
        for (u, v) in &self.pairs {
            let c = dot(v, g);
            for (o, ui) in out.iter_mut().zip(u) {
                *o -= c * ui;
            }
        }
        out
    }

    fn push(&mut self, u: Vec<f64>, v: Vec<f64>) {
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((u, v));
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn broyden_solve(cell: &EquilibriumCell, x: &Vector, z0: &Vector, cfg: &SolverConfig) -> Result<SolveResult> {
    check_inputs(cell, x, z0, cfg)?;
    if cfg.max_iters == 0 {
        return Ok(SolveResult::unstarted(z0));
    }
    let inj = cell.injection(x);
    let mut h = InverseJacobian::new(cfg.broyden_memory);
    let mut z = z0.as_slice().to_vec();
    let mut fz = cell.apply_injected(&z, &inj);
    let mut g = sub(&fz, &z);
    let mut trace = Vec::with_capacity(cfg.max_iters);
    let mut converged = false;

    for step in 1..=cfg.max_iters {
        let z_new = h.step(&fz, &g);
        if z_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                step,
                residual: f64::NAN,
            });
        }
        let fz_new = cell.apply_injected(&z_new, &inj);
        let g_new = sub(&fz_new, &z_new);
        let r = norm(&g_new);
        if !r.is_finite() || r > DIVERGENCE_THRESHOLD {
            return Err(Error::Divergence { step, residual: r });
        }
        trace.push(r);
        if r <= cfg.tol_abs {
            z = z_new;
            converged = true;
            break;
        }

        let dz = sub(&z_new, &z);
        let dg = sub(&g_new, &g);
        let h_dg = h.apply(&dg);
        let denom = dot(&dz, &h_dg);
        if denom.abs() > SKIP_RATIO * norm(&z_new) && denom != 0.0 {
            let u: Vec<f64> = dz.iter().zip(&h_dg).map(|(a, b)| (a - b) / denom).collect();
            let v = h.apply_transpose(&dz);
            h.push(u, v);
        }
        z = z_new;
        fz = fz_new;
        g = g_new;
    }

    Ok(SolveResult {
        z: Vector::from_raw(z),
        iterations: trace.len(),
        residual_trace: trace,
        converged,
    })
}
