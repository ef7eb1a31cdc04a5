//! Benchmark experiments: streaming runs over many seeds, summary checks,
//! and CSV/SVG output.
//!
//! Every experiment is a [`Suite`] registered by its short CLI name; its
//! [`ExperimentSpec`] can also be loaded from a TOML file.

mod metrics;
mod readout;
mod suite;
mod svg;

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use metrics::{csv_string, parse_csv, read_csv, sort_rows, write_csv, write_timing_csv, MetricsRow, TimingRow, CSV_HEADER};
pub use readout::{label_agreement, ReadoutHead};
pub use suite::{CheckOutcome, Suite, SuiteRegistry};
pub use svg::{parse_polylines, render_svg_lines, svg_string, GroupKey, Y_FLOOR};

use crate::cell::{make_multiscale_cell, make_random_cell, ActivationKind, EquilibriumCell, MultiscaleLayout, DEFAULT_GAMMA};
use crate::error::{Error, Result};
use crate::sequence::{generate_sequence, SequenceMode, SequenceSpec};
use crate::solver::{SolverConfig, SolverMethod};
use crate::stream::{stream_infer, BudgetSchedule, FrameRecord, StreamOptions, WarmStartPolicy};

/// Run `s` uses cell seed `s`, sequence seed `s + SEQUENCE_SEED_OFFSET` and
/// readout seed `s + HEAD_SEED_OFFSET`.
pub const SEQUENCE_SEED_OFFSET: u64 = 1_000_000;
pub const HEAD_SEED_OFFSET: u64 = 2_000_000;

pub const DEFAULT_SEEDS: usize = 20;
pub const DEFAULT_BUDGETS: [usize; 4] = [1, 2, 4, 8];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Reference-chain warm starts against cold starts.
    Fig2Analog,
    /// Streaming from the first frame's reference.
    Fig3RefAnalog,
    /// Streaming from zeros.
    Fig3ZeroAnalog,
    /// Streaming from zeros across a cut to unrelated input.
    ShotChangeAnalog,
    /// Streaming over a static input against one long solve.
    StaticEquivalence,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Fig2Analog,
        ExperimentKind::Fig3RefAnalog,
        ExperimentKind::Fig3ZeroAnalog,
        ExperimentKind::ShotChangeAnalog,
        ExperimentKind::StaticEquivalence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Fig2Analog => "fig2-analog",
            ExperimentKind::Fig3RefAnalog => "fig3-ref-analog",
            ExperimentKind::Fig3ZeroAnalog => "fig3-zero-analog",
            ExperimentKind::ShotChangeAnalog => "shot-change-analog",
            ExperimentKind::StaticEquivalence => "static-equivalence",
        }
    }

    pub fn primary_policy(self) -> WarmStartPolicy {
        match self {
            ExperimentKind::Fig2Analog => WarmStartPolicy::ReferenceChain,
            ExperimentKind::Fig3RefAnalog => WarmStartPolicy::StreamFromReference,
            _ => WarmStartPolicy::StreamFromZero,
        }
    }

    /// Cold-start comparison runs, written to a separate CSV.
    pub fn baseline_policy(self) -> Option<WarmStartPolicy> {
        match self {
            ExperimentKind::Fig2Analog | ExperimentKind::Fig3RefAnalog | ExperimentKind::Fig3ZeroAnalog => {
                Some(WarmStartPolicy::ColdStart)
            }
            _ => None,
        }
    }

    pub fn suite(self) -> &'static dyn Suite {
        suite::for_kind(self)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownName {
                kind: "experiment",
                name: s.into(),
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CellParams {
    pub dz: usize,
    pub dx: usize,
    pub gamma: f64,
    pub activation: ActivationKind,
    /// Readout classes for label agreement.
    pub classes: usize,
    /// Multiscale state layout; `dz` is ignored when set.
    pub layout: Option<MultiscaleLayout>,
}

impl Default for CellParams {
    fn default() -> Self {
        CellParams {
            dz: 64,
            dx: 16,
            gamma: DEFAULT_GAMMA,
            activation: ActivationKind::Tanh,
            classes: 10,
            layout: None,
        }
    }
}

impl CellParams {
    pub fn build(&self, seed: u64) -> Result<EquilibriumCell> {
        match &self.layout {
            Some(layout) => make_multiscale_cell(seed, layout, self.dx, self.gamma, self.activation),
            None => make_random_cell(seed, self.dz, self.dx, self.gamma, self.activation),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.layout.as_ref().map_or(self.dz, MultiscaleLayout::state_dim)
    }
}

/// Sequence settings shared by every seed; the frame dimension comes from the
/// cell and the seed from the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SequenceParams {
    pub mode: SequenceMode,
    pub length: usize,
    pub epsilon: f64,
    pub velocity: (f64, f64),
    pub grid: (usize, usize),
    pub shot_frames: Vec<usize>,
}

impl Default for SequenceParams {
    fn default() -> Self {
        SequenceParams {
            mode: SequenceMode::RandomWalk,
            length: 40,
            epsilon: 0.05,
            velocity: (0.25, 0.125),
            grid: (4, 4),
            shot_frames: Vec::new(),
        }
    }
}

impl SequenceParams {
    pub fn spec(&self, dx: usize, seed: u64) -> SequenceSpec {
        SequenceSpec {
            mode: self.mode,
            dx,
            grid: self.grid,
            length: self.length,
            epsilon: self.epsilon,
            velocity: self.velocity,
            shot_frames: self.shot_frames.clone(),
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: ExperimentKind,
    pub seeds: Vec<u64>,
    pub budgets: Vec<usize>,
    #[serde(default = "default_solver")]
    pub solver: SolverMethod,
    #[serde(default)]
    pub cell: CellParams,
    #[serde(default)]
    pub sequence: SequenceParams,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Also write per-frame solve times.
    #[serde(default)]
    pub record_timing: bool,
}

fn default_solver() -> SolverMethod {
    SolverMethod::Picard
}

impl ExperimentSpec {
    /// Built-in settings for `kind` with seeds `0..seeds`.
    pub fn preset(kind: ExperimentKind, seeds: usize) -> Self {
        let mut spec = ExperimentSpec {
            name: kind,
            seeds: (0..seeds as u64).collect(),
            budgets: DEFAULT_BUDGETS.to_vec(),
            solver: SolverMethod::Picard,
            cell: CellParams::default(),
            sequence: SequenceParams::default(),
            out_dir: None,
            record_timing: false,
        };
        match kind {
            ExperimentKind::ShotChangeAnalog => {
                spec.budgets = vec![4];
                spec.sequence.length = 60;
                spec.sequence.shot_frames = vec![30];
            }
            ExperimentKind::StaticEquivalence => {
                spec.sequence.length = 10;
                spec.sequence.epsilon = 0.0;
            }
            _ => {}
        }
        spec
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(text).map_err(|e| Error::parse(path, e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentSpec::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment spec serializes")
    }

    pub fn frame_dim(&self) -> usize {
        self.cell.dx
    }

    pub fn sequence_spec(&self, seed: u64) -> SequenceSpec {
        self.sequence.spec(self.cell.dx, seed + SEQUENCE_SEED_OFFSET)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidParameter(m));
        if self.seeds.is_empty() {
            return invalid("experiment needs at least one seed".into());
        }
        if self.budgets.is_empty() || self.budgets.contains(&0) {
            return invalid("budgets must be a nonempty list of positive integers".into());
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return invalid("seeds must be distinct".into());
        }
        if self.budgets.iter().collect::<BTreeSet<_>>().len() != self.budgets.len() {
            return invalid("budgets must be distinct".into());
        }
        if self.cell.classes < 2 || self.cell.classes > self.cell.state_dim() {
            return invalid(format!("classes must lie in [2, {}]", self.cell.state_dim()));
        }
        let seq = self.sequence_spec(0);
        seq.validate()?;
        if seq.mode == SequenceMode::MovingBlob && seq.frame_dim() != self.cell.dx {
            return invalid(format!("blob frames have {} pixels but cell dx is {}", seq.frame_dim(), self.cell.dx));
        }
        match self.name {
            ExperimentKind::ShotChangeAnalog if self.sequence.shot_frames.is_empty() => {
                invalid("shot-change experiment needs shot frames".into())
            }
            ExperimentKind::StaticEquivalence
                if self.solver != SolverMethod::Picard
                    || self.sequence.mode != SequenceMode::RandomWalk
                    || self.sequence.epsilon != 0.0
                    || !self.sequence.shot_frames.is_empty() =>
            {
                invalid("static equivalence needs picard over a static random walk (epsilon = 0, no shots)".into())
            }
            _ => Ok(()),
        }
    }
}

/// One streaming run: all frames for a single (seed, policy, budget).
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub policy: WarmStartPolicy,
    pub budget: usize,
    pub records: Vec<FrameRecord>,
}

impl RunRecord {
    pub fn sq_distances(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.sq_dist_to_reference.unwrap_or(f64::NAN)).collect()
    }

    pub fn rows(&self, experiment: &str) -> Vec<MetricsRow> {
        self.records
            .iter()
            .map(|r| MetricsRow {
                experiment: experiment.to_owned(),
                seed: self.seed,
                policy: self.policy.label().to_owned(),
                budget: self.budget,
                t: r.t,
                iterations_used: r.iterations_used,
                residual_norm: r.residual_norm,
                sq_dist_to_reference: r.sq_dist_to_reference,
                label_agreement: r.label_agreement,
            })
            .collect()
    }
}

/// Fills `label_agreement` on records that retain both states.
pub fn fill_label_agreement(records: &mut [FrameRecord], head: &ReadoutHead) -> Result<()> {
    for r in records {
        if let (Some(z), Some(zr)) = (&r.z_final, &r.z_reference) {
            r.label_agreement = Some(label_agreement(head, z, zr)?);
        }
    }
    Ok(())
}

/// Builds the seed's cell and sequence and streams it.
pub fn run_stream(spec: &ExperimentSpec, seed: u64, policy: WarmStartPolicy, budget: usize) -> Result<RunRecord> {
    let cell = spec.cell.build(seed)?;
    let frames = generate_sequence(&spec.sequence_spec(seed))?;
    let head = ReadoutHead::new(seed + HEAD_SEED_OFFSET, spec.cell.classes, &cell)?;
    let opts = StreamOptions {
        compute_references: true,
        retain_states: true,
        record_timing: spec.record_timing,
    };
    let cfg = SolverConfig::new(spec.solver, budget, 0.0);
    let mut records = stream_infer(&cell, &frames, &policy, &BudgetSchedule::Constant(budget), &cfg, &opts)?;
    fill_label_agreement(&mut records, &head)?;
    Ok(RunRecord {
        seed,
        policy,
        budget,
        records,
    })
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub spec: ExperimentSpec,
    /// Runs of the experiment's own policy, ordered by (seed, budget).
    pub runs: Vec<RunRecord>,
    /// Cold-start comparison runs, same order.
    pub baseline: Vec<RunRecord>,
    pub checks: Vec<CheckOutcome>,
}

impl ExperimentOutput {
    pub fn rows(&self) -> Vec<MetricsRow> {
        self.runs.iter().flat_map(|r| r.rows(self.spec.name.name())).collect()
    }

    pub fn baseline_rows(&self) -> Vec<MetricsRow> {
        self.baseline.iter().flat_map(|r| r.rows(self.spec.name.name())).collect()
    }

    pub fn timing_rows(&self) -> Vec<TimingRow> {
        self.runs
            .iter()
            .chain(&self.baseline)
            .flat_map(|run| {
                run.records.iter().filter_map(move |r| {
                    Some(TimingRow {
                        seed: run.seed,
                        policy: run.policy.label().to_owned(),
                        budget: run.budget,
                        t: r.t,
                        elapsed_ns: r.elapsed?.as_nanos(),
                    })
                })
            })
            .collect()
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Writes `<name>.csv`, `<name>.svg` and, when present,
    /// `<name>_baseline.csv` and `<name>_timing.csv` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let name = self.spec.name.name();
        let mut written = Vec::new();
        let rows = self.rows();
        let baseline = self.baseline_rows();

        let csv = dir.join(format!("{name}.csv"));
        write_csv(&rows, &csv)?;
        written.push(csv);
        if !baseline.is_empty() {
            let path = dir.join(format!("{name}_baseline.csv"));
            write_csv(&baseline, &path)?;
            written.push(path);
        }
        let svg = dir.join(format!("{name}.svg"));
        let plotted: Vec<MetricsRow> = rows.into_iter().chain(baseline).collect();
        render_svg_lines(&plotted, &[GroupKey::Policy, GroupKey::Budget], &svg)?;
        written.push(svg);
        if self.spec.record_timing {
            let path = dir.join(format!("{name}_timing.csv"));
            write_timing_csv(&self.timing_rows(), &path)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Runs every (seed, budget) stream of the experiment, in parallel, then its
/// summary checks. Results do not depend on thread scheduling.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let kind = spec.name;
    let mut tasks = Vec::new();
    for policy in std::iter::once(kind.primary_policy()).chain(kind.baseline_policy()) {
        for &seed in &spec.seeds {
            for &m in &spec.budgets {
                tasks.push((seed, policy, m));
            }
        }
    }
    let done: Vec<RunRecord> = tasks
        .par_iter()
        .map(|&(seed, policy, m)| run_stream(spec, seed, policy, m))
        .collect::<Result<_>>()?;
    let (runs, baseline): (Vec<_>, Vec<_>) = done.into_iter().partition(|r| r.policy == kind.primary_policy());
    let checks = kind.suite().checks(spec, &runs, &baseline)?;
    Ok(ExperimentOutput {
        spec: spec.clone(),
        runs,
        baseline,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ExperimentKind) -> ExperimentSpec {
        let mut spec = ExperimentSpec::preset(kind, 2);
        spec.cell.dz = 16;
        spec.cell.dx = 4;
        spec.sequence.length = spec.sequence.length.min(24);
        if kind == ExperimentKind::ShotChangeAnalog {
            spec.sequence.shot_frames = vec![12];
        }
        spec
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
            assert_eq!(toml::Value::try_from(k).unwrap().as_str(), Some(k.name()));
        }
        assert!("fig4".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn presets_validate() {
        for k in ExperimentKind::ALL {
            ExperimentSpec::preset(k, 20).validate().unwrap();
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let base = ExperimentSpec::preset(ExperimentKind::Fig3ZeroAnalog, 3);
        let mut s = base.clone();
        s.budgets.clear();
        assert!(s.validate().is_err());
        let mut s = base.clone();
        s.seeds.clear();
        assert!(s.validate().is_err());
        let mut s = base.clone();
        s.seeds = vec![1, 1];
        assert!(s.validate().is_err());
        let mut s = ExperimentSpec::preset(ExperimentKind::StaticEquivalence, 3);
        s.solver = SolverMethod::Broyden;
        assert!(s.validate().is_err());
        let mut s = ExperimentSpec::preset(ExperimentKind::ShotChangeAnalog, 3);
        s.sequence.shot_frames.clear();
        assert!(s.validate().is_err());
        let mut s = base;
        s.cell.classes = 65;
        assert!(s.validate().is_err());
    }

    #[test]
    fn spec_toml_round_trip() {
        let spec = ExperimentSpec::preset(ExperimentKind::ShotChangeAnalog, 4);
        let back = ExperimentSpec::from_toml(&spec.to_toml(), Path::new("spec.toml")).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn minimal_spec_file_uses_defaults() {
        let text = "name = \"fig3-zero-analog\"\nseeds = [0, 1]\nbudgets = [2]\n[sequence]\nepsilon = 0.01\n";
        let spec = ExperimentSpec::from_toml(text, Path::new("s.toml")).unwrap();
        assert_eq!(spec.cell, CellParams::default());
        assert_eq!(spec.sequence.length, 40);
        assert_eq!(spec.sequence.epsilon, 0.01);
        assert_eq!(spec.solver, SolverMethod::Picard);
        assert!(ExperimentSpec::from_toml("name = \"fig3-zero-analog\"\nseeds = [0]\nbudgets = [2]\nbogus = 1\n", Path::new("s.toml")).is_err());
    }

    #[test]
    fn one_row_per_seed_budget_frame() {
        let spec = small(ExperimentKind::Fig3ZeroAnalog);
        let out = run_experiment(&spec).unwrap();
        let rows = out.rows();
        assert_eq!(rows.len(), 2 * 4 * 24);
        assert!(rows.iter().all(|r| r.policy == "stream-zero" && r.experiment == "fig3-zero-analog"));
        assert_eq!(out.baseline_rows().len(), 2 * 4 * 24);
        let keys: BTreeSet<_> = rows.iter().map(|r| (r.seed, r.budget, r.t)).collect();
        assert_eq!(keys.len(), rows.len());
        assert!(rows.iter().all(|r| r.sq_dist_to_reference.is_some() && r.label_agreement.is_some()));
    }

    #[test]
    fn repeated_runs_write_identical_bytes() {
        let spec = small(ExperimentKind::Fig2Analog);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let files_a = run_experiment(&spec).unwrap().write(a.path()).unwrap();
        let files_b = run_experiment(&spec).unwrap().write(b.path()).unwrap();
        assert_eq!(files_a.len(), 3);
        for (fa, fb) in files_a.iter().zip(&files_b) {
            assert_eq!(fa.file_name(), fb.file_name());
            assert_eq!(std::fs::read(fa).unwrap(), std::fs::read(fb).unwrap());
        }
    }

    #[test]
    fn static_equivalence_passes() {
        let out = run_experiment(&small(ExperimentKind::StaticEquivalence)).unwrap();
        assert!(!out.checks.is_empty());
        assert!(out.all_passed(), "{:?}", out.checks);
    }

    #[test]
    fn timing_written_on_request() {
        let mut spec = small(ExperimentKind::ShotChangeAnalog);
        spec.record_timing = true;
        let out = run_experiment(&spec).unwrap();
        assert_eq!(out.timing_rows().len(), 2 * 24);
        let dir = tempfile::tempdir().unwrap();
        let files = out.write(dir.path()).unwrap();
        assert!(files.iter().any(|f| f.ends_with("shot-change-analog_timing.csv")));
    }
}
