use std::collections::BTreeMap;

use streamdeq::bench::{parse_polylines, run_experiment, svg_string, ExperimentKind, ExperimentSpec, GroupKey};
use streamdeq::stream::StartPoint;
use streamdeq::{
    generate_sequence, make_random_cell, sq_distance, stream_infer, ActivationKind, BudgetSchedule, EquilibriumCell,
    FixedPointSolver, PolicyRegistry, Result, SequenceSpec, SolveResult, SolverConfig, SolverMethod, SolverRegistry,
    StreamOptions, Vector, WarmStart, WarmStartPolicy,
};

/// Restarts from zeros every `period` frames, carries the estimate otherwise.
struct Keyframe {
    period: usize,
}

impl WarmStart for Keyframe {
    fn name(&self) -> &str {
        "keyframe"
    }

    fn start_point(&self, t: usize) -> StartPoint {
        if t.is_multiple_of(self.period) {
            StartPoint::Zeros
        } else {
            StartPoint::PreviousEstimate
        }
    }
}

/// Picard iteration run twice per requested step.
struct DoublePicard;

impl FixedPointSolver for DoublePicard {
    fn name(&self) -> &'static str {
        "double-picard"
    }

    fn solve(&self, cell: &EquilibriumCell, x: &Vector, z0: &Vector, cfg: &SolverConfig) -> Result<SolveResult> {
        let doubled = SolverConfig::new(SolverMethod::Picard, cfg.max_iters * 2, cfg.tol_abs);
        streamdeq::picard_solve(cell, x, z0, &doubled)
    }
}

fn setup() -> (EquilibriumCell, Vec<Vector>) {
    let cell = make_random_cell(11, 24, 6, 0.9, ActivationKind::Tanh).unwrap();
    let frames = generate_sequence(&SequenceSpec::random_walk(6, 12, 0.05, 11)).unwrap();
    (cell, frames)
}

#[test]
fn custom_policy_through_registry() {
    let (cell, frames) = setup();
    let mut reg = PolicyRegistry::builtin();
    reg.register(Box::new(Keyframe { period: 4 }));
    assert!(reg.names().any(|n| n == "keyframe"));
    let cfg = SolverConfig::new(SolverMethod::Picard, 2, 0.0);
    let run = |name: &str| {
        stream_infer(&cell, &frames, reg.get(name).unwrap(), &BudgetSchedule::Constant(2), &cfg, &StreamOptions::default().retaining())
            .unwrap()
    };
    let key = run("keyframe");
    let cold = run("cold");
    let warm = run("stream-zero");
    for t in 0..frames.len() {
        let expect = if t % 4 == 0 { &cold[t] } else if t < 4 { &warm[t] } else { continue };
        assert_eq!(key[t].z_final, expect.z_final, "t={t}");
    }
}

#[test]
fn custom_solver_through_registry() {
    let (cell, frames) = setup();
    let mut reg = SolverRegistry::builtin();
    reg.register(Box::new(DoublePicard));
    let solver = reg.get("double-picard").unwrap();
    let z0 = Vector::zeros(cell.dz());
    let a = solver.solve(&cell, &frames[0], &z0, &SolverConfig::new(SolverMethod::Picard, 3, 0.0)).unwrap();
    let b = reg.get("picard").unwrap().solve(&cell, &frames[0], &z0, &SolverConfig::new(SolverMethod::Picard, 6, 0.0)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn saved_cell_replays_stream_bit_exactly() {
    let (cell, frames) = setup();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cell.toml");
    cell.save(&path).unwrap();
    let loaded = EquilibriumCell::load(&path).unwrap();
    let cfg = SolverConfig::new(SolverMethod::Broyden, 3, 0.0);
    let run = |c: &EquilibriumCell| {
        stream_infer(c, &frames, &WarmStartPolicy::StreamFromZero, &BudgetSchedule::Constant(3), &cfg, &StreamOptions::with_references().retaining())
            .unwrap()
    };
    assert_eq!(run(&cell), run(&loaded));
}

#[test]
fn fig3_zero_curves_ordered_by_budget() {
    let spec = ExperimentSpec::preset(ExperimentKind::Fig3ZeroAnalog, 20);
    let out = run_experiment(&spec).unwrap();
    let svg = svg_string(&out.rows(), &[GroupKey::Policy, GroupKey::Budget]).unwrap();
    let lines = parse_polylines(&svg);
    let (m1, m8) = (&lines["stream-zero M=1"], &lines["stream-zero M=8"]);
    // larger y is lower on the page
    for (a, b) in m1.iter().zip(m8).skip(20) {
        assert!(a.1 < b.1, "{a:?} vs {b:?}");
    }
    let ordering = out.checks.iter().find(|c| c.name.contains("nonincreasing in M")).unwrap();
    assert!(ordering.passed, "{ordering}");
    let labels = out.checks.iter().find(|c| c.name.contains("label agreement")).unwrap();
    assert!(labels.passed, "{labels}");
}

#[test]
fn every_preset_orders_plateaus_by_budget() {
    for kind in [ExperimentKind::Fig2Analog, ExperimentKind::Fig3RefAnalog] {
        let out = run_experiment(&ExperimentSpec::preset(kind, 20)).unwrap();
        let ordering = out.checks.iter().find(|c| c.name.contains("nonincreasing in M")).unwrap();
        assert!(ordering.passed, "{kind}: {ordering}");
    }
}

#[test]
fn broyden_ordering_within_relative_tolerance() {
    let mut spec = ExperimentSpec::preset(ExperimentKind::Fig3ZeroAnalog, 20);
    spec.solver = SolverMethod::Broyden;
    let out = run_experiment(&spec).unwrap();
    let ordering = out.checks.iter().find(|c| c.name.contains("nonincreasing in M")).unwrap();
    assert!(ordering.passed, "{ordering}");
}

#[test]
fn shot_change_spikes_for_every_seed() {
    let out = run_experiment(&ExperimentSpec::preset(ExperimentKind::ShotChangeAnalog, 20)).unwrap();
    let check = &out.checks[0];
    assert_eq!(check.details.len(), 20);
    assert!(check.details.iter().all(|d| d.contains("spike yes")), "{check}");
}

#[test]
fn multiscale_experiment_reports_position_agreement() {
    let mut spec = ExperimentSpec::preset(ExperimentKind::Fig3ZeroAnalog, 2);
    spec.cell.layout = Some(streamdeq::MultiscaleLayout::pyramid(streamdeq::Scale::new(4, 4, 4), 2).unwrap());
    spec.cell.classes = 4;
    spec.sequence.length = 12;
    let out = run_experiment(&spec).unwrap();
    let values: BTreeMap<String, f64> = out
        .rows()
        .iter()
        .map(|r| (format!("{}-{}-{}", r.seed, r.budget, r.t), r.label_agreement.unwrap()))
        .collect();
    // 16 finest positions, so agreement is a multiple of 1/16
    assert!(values.values().all(|v| (v * 16.0).fract() == 0.0 && (0.0..=1.0).contains(v)));
}

#[test]
fn reference_chain_distance_independent_of_history() {
    let (cell, frames) = setup();
    let cfg = SolverConfig::new(SolverMethod::Picard, 1, 0.0);
    let full = streamdeq::replay_reference_chain(&cell, &frames, 1, &cfg).unwrap();
    let tail = streamdeq::replay_reference_chain(&cell, &frames[5..], 1, &cfg).unwrap();
    // from frame 1 of the tail on, both start at the same previous reference
    for (a, b) in full[6..].iter().zip(&tail[1..]) {
        assert_eq!(a.sq_dist_to_reference, b.sq_dist_to_reference);
    }
    let d = sq_distance(&frames[0], &frames[1]).unwrap().sqrt();
    assert!((d - 0.05).abs() < 1e-12);
}
