//! Per-frame budgeted solves that thread the representation through a stream.
//!
//! A [`WarmStart`] strategy picks each frame's starting state; a
//! [`BudgetSchedule`] picks its iteration budget. Only `z` carries over
//! between frames, solver internals (Broyden pairs) are rebuilt per frame.

mod policy;

use std::time::{Duration, Instant};

pub use policy::{PolicyRegistry, StartPoint, WarmStart, WarmStartPolicy};

use crate::cell::EquilibriumCell;
use crate::error::{Error, Result};
use crate::linalg::{self, Vector};
use crate::solver::{reference_fixed_point, solve, SolverConfig};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BudgetSchedule {
    Constant(usize),
    PerFrame(Vec<usize>),
}

impl BudgetSchedule {
    pub fn budget(&self, t: usize) -> usize {
        match self {
            BudgetSchedule::Constant(m) => *m,
            BudgetSchedule::PerFrame(list) => list[t],
        }
    }

    pub fn validate(&self, frames: usize) -> Result<()> {
        match self {
            BudgetSchedule::Constant(0) => Err(Error::InvalidParameter("constant budget must be positive".into())),
            BudgetSchedule::Constant(_) => Ok(()),
            BudgetSchedule::PerFrame(list) if list.len() != frames => Err(Error::ScheduleLength {
                expected: frames,
                got: list.len(),
            }),
            BudgetSchedule::PerFrame(_) => Ok(()),
        }
    }

    /// Budget label used in metric rows: `M` for constant schedules, 0 for
    /// per-frame ones.
    pub fn label(&self) -> usize {
        match self {
            BudgetSchedule::Constant(m) => *m,
            BudgetSchedule::PerFrame(_) => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StreamOptions {
    /// Solve every frame to convergence as an oracle pass and report
    /// distances. Cost is not counted in `iterations_used`.
    pub compute_references: bool,
    /// Keep final and reference states in the records.
    pub retain_states: bool,
    /// Measure wall-clock time of each budgeted solve.
    pub record_timing: bool,
}

impl StreamOptions {
    pub fn with_references() -> Self {
        StreamOptions {
            compute_references: true,
            ..Default::default()
        }
    }

    pub fn retaining(mut self) -> Self {
        self.retain_states = true;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameRecord {
    pub t: usize,
    pub iterations_used: usize,
    /// `‖f(z) − z‖` at the frame's final estimate.
    pub residual_norm: f64,
    pub sq_dist_to_reference: Option<f64>,
    pub label_agreement: Option<f64>,
    pub z_final: Option<Vector>,
    pub z_reference: Option<Vector>,
    pub elapsed: Option<Duration>,
}

impl FrameRecord {
    pub fn dist_to_reference(&self) -> Option<f64> {
        self.sq_dist_to_reference.map(f64::sqrt)
    }
}

/// Runs the stream causally: frame `t`'s record depends on frames `0..=t` only.
pub fn stream_infer(
    cell: &EquilibriumCell,
    frames: &[Vector],
    policy: &dyn WarmStart,
    schedule: &BudgetSchedule,
    solver_cfg: &SolverConfig,
    opts: &StreamOptions,
) -> Result<Vec<FrameRecord>> {
    schedule.validate(frames.len())?;
    solver_cfg.validate()?;
    let dz = cell.dz();
    let mut records = Vec::with_capacity(frames.len());
    let mut prev_estimate: Option<Vector> = None;
    let mut prev_reference: Option<Vector> = None;

    for (t, x) in frames.iter().enumerate() {
        let start = policy.start_point(t);
        let next_needs_prev_ref = t + 1 < frames.len() && policy.start_point(t + 1) == StartPoint::PreviousReference;
        let reference = if opts.compute_references || start == StartPoint::CurrentReference || next_needs_prev_ref {
            Some(reference_fixed_point(cell, x).map_err(|e| e.at_frame(t))?)
        } else {
            None
        };

        let z0 = match start {
            StartPoint::Zeros => Vector::zeros(dz),
            StartPoint::PreviousEstimate => prev_estimate.take().unwrap_or_else(|| Vector::zeros(dz)),
            StartPoint::PreviousReference => prev_reference.take().unwrap_or_else(|| Vector::zeros(dz)),
            StartPoint::CurrentReference => reference.clone().expect("reference computed above"),
        };

        let cfg = solver_cfg.with_budget(schedule.budget(t));
        let began = opts.record_timing.then(Instant::now);
        let result = solve(cell, x, &z0, &cfg).map_err(|e| e.at_frame(t))?;
        let elapsed = began.map(|b| b.elapsed());

        let residual_norm = match result.final_residual() {
            Some(r) => r,
            None => linalg::l2_norm(&cell.residual(&result.z, x).map_err(|e| e.at_frame(t))?),
        };
        let sq_dist = match (&reference, opts.compute_references) {
            (Some(r), true) => Some(linalg::sq_distance(&result.z, r)?),
            _ => None,
        };

        records.push(FrameRecord {
            t,
            iterations_used: result.iterations,
            residual_norm,
            sq_dist_to_reference: sq_dist,
            label_agreement: None,
            z_final: opts.retain_states.then(|| result.z.clone()),
            z_reference: if opts.retain_states && opts.compute_references { reference.clone() } else { None },
            elapsed,
        });
        prev_estimate = Some(result.z);
        prev_reference = reference;
    }
    Ok(records)
}

/// Every frame warm-started from the previous frame's reference, with a
/// constant budget `m` and references reported.
pub fn replay_reference_chain(
    cell: &EquilibriumCell,
    frames: &[Vector],
    m: usize,
    solver_cfg: &SolverConfig,
) -> Result<Vec<FrameRecord>> {
    stream_infer(
        cell,
        frames,
        &WarmStartPolicy::ReferenceChain,
        &BudgetSchedule::Constant(m),
        solver_cfg,
        &StreamOptions::with_references(),
    )
}
