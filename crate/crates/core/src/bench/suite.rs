use std::collections::BTreeMap;
use std::fmt;

use super::{ExperimentKind, ExperimentSpec, RunRecord};
use crate::error::{Error, Result};
use crate::linalg::{self, Vector};
use crate::sequence::generate_sequence;
use crate::solver::{solve, SolverConfig, SolverMethod};
use crate::stream::WarmStartPolicy;

/// Result of one built-in property check over an experiment's runs.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    /// One human-readable line per measured item.
    pub details: Vec<String>,
}

impl CheckOutcome {
    fn new(name: impl Into<String>, passed: bool, details: Vec<String>) -> Self {
        CheckOutcome {
            name: name.into(),
            passed,
            details,
        }
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", if self.passed { "PASS" } else { "FAIL" }, self.name)?;
        for d in &self.details {
            write!(f, "\n    {d}")?;
        }
        Ok(())
    }
}

/// A named benchmark preset with its summary checks.
pub trait Suite: Send + Sync {
    /// Short name used on the command line.
    fn name(&self) -> &'static str;

    fn kind(&self) -> ExperimentKind;

    fn default_spec(&self, seeds: usize) -> ExperimentSpec {
        ExperimentSpec::preset(self.kind(), seeds)
    }

    fn checks(&self, spec: &ExperimentSpec, runs: &[RunRecord], baseline: &[RunRecord]) -> Result<Vec<CheckOutcome>>;
}

pub struct SuiteRegistry {
    suites: BTreeMap<&'static str, Box<dyn Suite>>,
}

impl SuiteRegistry {
    pub fn empty() -> Self {
        SuiteRegistry {
            suites: BTreeMap::new(),
        }
    }

    pub fn builtin() -> Self {
        let mut reg = SuiteRegistry::empty();
        reg.register(Box::new(WarmStartDominance));
        reg.register(Box::new(StreamFromReferenceSuite));
        reg.register(Box::new(StreamFromZeroSuite));
        reg.register(Box::new(ShotChange));
        reg.register(Box::new(StaticEquivalence));
        reg
    }

    pub fn register(&mut self, suite: Box<dyn Suite>) {
        self.suites.insert(suite.name(), suite);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Suite> {
        self.suites.get(name).map(|s| s.as_ref()).ok_or_else(|| Error::UnknownName {
            kind: "suite",
            name: name.into(),
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.suites.keys().copied()
    }
}

impl Default for SuiteRegistry {
    fn default() -> Self {
        SuiteRegistry::builtin()
    }
}

pub(super) fn for_kind(kind: ExperimentKind) -> &'static dyn Suite {
    match kind {
        ExperimentKind::Fig2Analog => &WarmStartDominance,
        ExperimentKind::Fig3RefAnalog => &StreamFromReferenceSuite,
        ExperimentKind::Fig3ZeroAnalog => &StreamFromZeroSuite,
        ExperimentKind::ShotChangeAnalog => &ShotChange,
        ExperimentKind::StaticEquivalence => &StaticEquivalence,
    }
}

/// Frame at which distances are compared against the plateau.
const EARLY_FRAME: usize = 5;

/// Seed-mean squared distance per frame for every (policy, budget).
fn seed_means(runs: &[RunRecord]) -> BTreeMap<(WarmStartPolicy, usize), Vec<f64>> {
    let mut acc: BTreeMap<(WarmStartPolicy, usize), (Vec<f64>, usize)> = BTreeMap::new();
    for run in runs {
        let d = run.sq_distances();
        let slot = acc.entry((run.policy, run.budget)).or_insert_with(|| (vec![0.0; d.len()], 0));
        for (s, v) in slot.0.iter_mut().zip(&d) {
            *s += v;
        }
        slot.1 += 1;
    }
    acc.into_iter()
        .map(|(k, (sum, n))| (k, sum.into_iter().map(|s| s / n as f64).collect()))
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sorted_budgets(spec: &ExperimentSpec) -> Vec<usize> {
    let mut b = spec.budgets.clone();
    b.sort_unstable();
    b
}

/// Second half of the stream, `[T/2, T)`.
fn plateau_start(spec: &ExperimentSpec) -> usize {
    spec.sequence.length / 2
}

fn plateau_not_above_early(spec: &ExperimentSpec, policy: WarmStartPolicy, runs: &[RunRecord]) -> Option<CheckOutcome> {
    if spec.sequence.length <= 2 * EARLY_FRAME {
        return None;
    }
    let means = seed_means(runs);
    let from = plateau_start(spec);
    let mut ok = true;
    let details = sorted_budgets(spec)
        .into_iter()
        .map(|m| {
            let curve = &means[&(policy, m)];
            let plateau = mean(&curve[from..]);
            let early = curve[EARLY_FRAME];
            ok &= plateau <= early;
            format!("M={m}: plateau {plateau:.3e}, t={EARLY_FRAME} {early:.3e}")
        })
        .collect();
    Some(CheckOutcome::new(
        format!("{policy}: plateau mean over t >= {from} at or below the t={EARLY_FRAME} distance"),
        ok,
        details,
    ))
}

/// Seed-mean distance at every plateau frame is nonincreasing in M.
fn budget_ordering(spec: &ExperimentSpec, policy: WarmStartPolicy, runs: &[RunRecord]) -> Option<CheckOutcome> {
    let budgets = sorted_budgets(spec);
    if budgets.len() < 2 {
        return None;
    }
    let means = seed_means(runs);
    let slack = |d: f64| match spec.solver {
        SolverMethod::Picard => d + 1e-9,
        SolverMethod::Broyden => d * 1.05,
    };
    let mut details = Vec::new();
    for pair in budgets.windows(2) {
        let (coarse, fine) = (&means[&(policy, pair[0])], &means[&(policy, pair[1])]);
        for (t, (&lo, &hi)) in coarse.iter().zip(fine).enumerate().skip(plateau_start(spec)) {
            if hi > slack(lo) {
                details.push(format!("t={t}: M={} {hi:.3e} above M={} {lo:.3e}", pair[1], pair[0]));
            }
        }
    }
    let strict: Vec<String> = budgets
        .iter()
        .map(|m| format!("M={m}: {:.3e}", mean(&means[&(policy, *m)][plateau_start(spec)..])))
        .collect();
    let passed = details.is_empty();
    if passed {
        details.push(format!("plateau means {}", strict.join(", ")));
    }
    Some(CheckOutcome::new(
        format!("{policy}: distance nonincreasing in M at every t >= {}", plateau_start(spec)),
        passed,
        details,
    ))
}

pub struct WarmStartDominance;

impl Suite for WarmStartDominance {
    fn name(&self) -> &'static str {
        "fig2"
    }

    fn kind(&self) -> ExperimentKind {
        ExperimentKind::Fig2Analog
    }

    fn checks(&self, spec: &ExperimentSpec, runs: &[RunRecord], baseline: &[RunRecord]) -> Result<Vec<CheckOutcome>> {
        let budgets = sorted_budgets(spec);
        let (lo, hi) = (budgets[0], budgets[budgets.len() - 1]);
        let warm = &seed_means(runs)[&(WarmStartPolicy::ReferenceChain, lo)];
        let cold = &seed_means(baseline)[&(WarmStartPolicy::ColdStart, hi)];
        let losing: Vec<String> = (1..warm.len())
            .filter(|&t| warm[t] >= cold[t])
            .map(|t| format!("t={t}: ref-chain {:.3e} vs cold {:.3e}", warm[t], cold[t]))
            .collect();
        let passed = losing.is_empty();
        let details = if passed {
            vec![format!(
                "worst ratio {:.3e}",
                (1..warm.len()).map(|t| warm[t] / cold[t]).fold(0.0, f64::max)
            )]
        } else {
            losing
        };
        let mut out = vec![CheckOutcome::new(
            format!("ref-chain M={lo} closer than cold M={hi} at every t >= 1"),
            passed,
            details,
        )];
        out.extend(budget_ordering(spec, WarmStartPolicy::ReferenceChain, runs));
        Ok(out)
    }
}

pub struct StreamFromReferenceSuite;

impl Suite for StreamFromReferenceSuite {
    fn name(&self) -> &'static str {
        "fig3-ref"
    }

    fn kind(&self) -> ExperimentKind {
        ExperimentKind::Fig3RefAnalog
    }

    fn checks(&self, spec: &ExperimentSpec, runs: &[RunRecord], baseline: &[RunRecord]) -> Result<Vec<CheckOutcome>> {
        let policy = WarmStartPolicy::StreamFromReference;
        let mut out: Vec<CheckOutcome> = plateau_not_above_early(spec, policy, runs).into_iter().collect();
        out.extend(budget_ordering(spec, policy, runs));
        let t = 20;
        if spec.budgets.contains(&2) && spec.budgets.contains(&4) && spec.sequence.length > t {
            let stream = seed_means(runs)[&(policy, 2)][t];
            let cold = seed_means(baseline)[&(WarmStartPolicy::ColdStart, 4)][t];
            out.push(CheckOutcome::new(
                format!("stream-ref M=2 closer than cold M=4 at t={t}"),
                stream < cold,
                vec![format!("stream-ref {stream:.3e}, cold {cold:.3e}")],
            ));
        }
        Ok(out)
    }
}

pub struct StreamFromZeroSuite;

impl Suite for StreamFromZeroSuite {
    fn name(&self) -> &'static str {
        "fig3-zero"
    }

    fn kind(&self) -> ExperimentKind {
        ExperimentKind::Fig3ZeroAnalog
    }

    fn checks(&self, spec: &ExperimentSpec, runs: &[RunRecord], _baseline: &[RunRecord]) -> Result<Vec<CheckOutcome>> {
        let policy = WarmStartPolicy::StreamFromZero;
        let mut out: Vec<CheckOutcome> = plateau_not_above_early(spec, policy, runs).into_iter().collect();
        out.extend(budget_ordering(spec, policy, runs));
        if spec.solver == SolverMethod::Picard {
            out.push(recursion_bound(spec, runs)?);
        }
        if spec.budgets.contains(&1) && spec.budgets.contains(&4) {
            let from = plateau_start(spec);
            let agreement = |m: usize| {
                let vals: Vec<f64> = runs
                    .iter()
                    .filter(|r| r.budget == m)
                    .flat_map(|r| r.records[from..].iter().filter_map(|f| f.label_agreement))
                    .collect();
                mean(&vals)
            };
            let (a1, a4) = (agreement(1), agreement(4));
            let passed = if a1 == 1.0 && a4 == 1.0 { true } else { a4 > a1 };
            out.push(CheckOutcome::new(
                format!("label agreement over t >= {from}: M=4 above M=1 (or both 1)"),
                passed,
                vec![format!("M=1 {a1:.4}, M=4 {a4:.4}")],
            ));
        }
        Ok(out)
    }
}

/// `d_t ≤ γ^M (d_{t−1} + δ_t) + 1e−9` with `δ_t = ‖z*_t − z*_{t−1}‖`, which
/// any Picard stream of a γ-contraction satisfies.
fn recursion_bound(spec: &ExperimentSpec, runs: &[RunRecord]) -> Result<CheckOutcome> {
    let gamma = spec.cell.gamma;
    let mut violations = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for run in runs {
        let contraction = gamma.powi(run.budget as i32);
        for w in run.records.windows(2) {
            let (prev, cur) = (&w[0], &w[1]);
            let (Some(zp), Some(zc)) = (&prev.z_reference, &cur.z_reference) else {
                return Err(Error::InvalidParameter("recursion bound needs retained reference states".into()));
            };
            let delta = linalg::sq_distance(zp, zc)?.sqrt();
            let d_prev = prev.dist_to_reference().unwrap_or(f64::NAN);
            let d = cur.dist_to_reference().unwrap_or(f64::NAN);
            let bound = contraction * (d_prev + delta) + 1e-9;
            worst = worst.max(d - bound);
            if d > bound || d.is_nan() {
                violations.push(format!("seed {} M={} t={}: {d:.3e} > {bound:.3e}", run.seed, run.budget, cur.t));
            }
        }
    }
    let passed = violations.is_empty();
    let details = if passed {
        vec![format!("largest d_t - bound {worst:.3e}")]
    } else {
        violations
    };
    Ok(CheckOutcome::new("picard recursion bound at every frame", passed, details))
}

pub struct ShotChange;

/// Recovery detector around the first shot `s`: the distance at `s` must
/// exceed `SPIKE_FACTOR` times the mean over `[s − PRE_WINDOW, s)`, then some
/// frame in `(s, s + RECOVERY_WINDOW]` must fall to within `RECOVERY_FACTOR`
/// of that mean.
pub const SPIKE_FACTOR: f64 = 2.0;
pub const RECOVERY_FACTOR: f64 = 1.2;
pub const PRE_WINDOW: usize = 10;
pub const RECOVERY_WINDOW: usize = 10;
/// Fraction of seeds that must recover (18 of 20).
pub const RECOVERY_QUORUM: f64 = 0.9;

/// Frames after the shot until recovery, if it happens in the window.
pub fn recovery_frames(d: &[f64], shot: usize) -> (bool, Option<usize>) {
    let pre = mean(&d[shot.saturating_sub(PRE_WINDOW)..shot]);
    let spiked = d[shot] > SPIKE_FACTOR * pre;
    let recovered = (1..=RECOVERY_WINDOW)
        .take_while(|k| shot + k < d.len())
        .find(|k| d[shot + k] <= RECOVERY_FACTOR * pre);
    (spiked, recovered)
}

impl Suite for ShotChange {
    fn name(&self) -> &'static str {
        "shot-change"
    }

    fn kind(&self) -> ExperimentKind {
        ExperimentKind::ShotChangeAnalog
    }

    fn checks(&self, spec: &ExperimentSpec, runs: &[RunRecord], _baseline: &[RunRecord]) -> Result<Vec<CheckOutcome>> {
        let shot = spec.sequence.shot_frames[0];
        let mut out = Vec::new();
        for m in sorted_budgets(spec) {
            let mut good = 0;
            let mut details = Vec::new();
            for run in runs.iter().filter(|r| r.budget == m) {
                let d = run.sq_distances();
                let (spiked, recovered) = recovery_frames(&d, shot);
                if spiked && recovered.is_some() {
                    good += 1;
                }
                details.push(format!(
                    "seed {}: spike {}, {}",
                    run.seed,
                    if spiked { "yes" } else { "no" },
                    match recovered {
                        Some(k) => format!("recovered after {k} frame{}", if k == 1 { "" } else { "s" }),
                        None => format!("not recovered within {RECOVERY_WINDOW} frames"),
                    }
                ));
            }
            let total = details.len();
            let needed = (RECOVERY_QUORUM * total as f64).ceil() as usize;
            out.push(CheckOutcome::new(
                format!("M={m}: spike and recovery after the shot at t={shot} for {good}/{total} seeds (need {needed})"),
                good >= needed,
                details,
            ));
        }
        Ok(out)
    }
}

pub struct StaticEquivalence;

impl Suite for StaticEquivalence {
    fn name(&self) -> &'static str {
        "static-eq"
    }

    fn kind(&self) -> ExperimentKind {
        ExperimentKind::StaticEquivalence
    }

    fn checks(&self, spec: &ExperimentSpec, runs: &[RunRecord], _baseline: &[RunRecord]) -> Result<Vec<CheckOutcome>> {
        let frames_len = spec.sequence.length;
        let mut mismatches = Vec::new();
        for run in runs {
            let cell = spec.cell.build(run.seed)?;
            let frames = generate_sequence(&spec.sequence_spec(run.seed))?;
            let long = SolverConfig::new(spec.solver, frames_len * run.budget, 0.0);
            let single = solve(&cell, &frames[0], &Vector::zeros(cell.dz()), &long)?;
            let last = run.records.last().and_then(|r| r.z_final.as_ref());
            if last != Some(&single.z) {
                mismatches.push(format!("seed {} M={}", run.seed, run.budget));
            }
        }
        let passed = mismatches.is_empty();
        let details = if passed {
            vec![format!("{} streams equal one {}-frame solve bit for bit", runs.len(), frames_len)]
        } else {
            mismatches
        };
        Ok(vec![CheckOutcome::new("static input: stream equals one long solve", passed, details)])
    }
}
