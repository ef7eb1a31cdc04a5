//! `streamdeq`: fixed-point solves, streaming runs and benchmark suites.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use streamdeq::bench::{
    fill_label_agreement, run_experiment, write_csv, ExperimentSpec, MetricsRow, ReadoutHead, SuiteRegistry,
    HEAD_SEED_OFFSET, SEQUENCE_SEED_OFFSET,
};
use streamdeq::sequence::{read_frames, write_frames};
use streamdeq::solver::DEFAULT_MAX_ITERS;
use streamdeq::{
    generate_sequence, l2_norm, make_random_cell, solve, stream_infer, ActivationKind, BudgetSchedule,
    EquilibriumCell, Error, SequenceSpec, SolverConfig, SolverMethod, StreamOptions, Vector, WarmStartPolicy,
};

const DEFAULT_DZ: usize = 64;
const DEFAULT_DX: usize = 16;
const DEFAULT_CLASSES: usize = 10;
const OUT_DIR_ENV: &str = "STREAMDEQ_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "streamdeq", version, about = "Fixed-point inference with warm-started streaming solves")]
struct Cli {
    /// Seed for generated cells, inputs and sequences.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one fixed point and report the residual.
    Solve(SolveArgs),
    /// Stream a sequence with per-frame budgets and write metrics CSV.
    Stream(StreamArgs),
    /// Run a benchmark suite and write CSV and SVG outputs.
    Bench(BenchArgs),
    /// Write a synthetic sequence as a frame dump.
    GenSequence(GenArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Picard,
    Broyden,
}

impl From<Method> for SolverMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Picard => SolverMethod::Picard,
            Method::Broyden => SolverMethod::Broyden,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Policy {
    Cold,
    RefChain,
    StreamRef,
    StreamZero,
}

impl From<Policy> for WarmStartPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Cold => WarmStartPolicy::ColdStart,
            Policy::RefChain => WarmStartPolicy::ReferenceChain,
            Policy::StreamRef => WarmStartPolicy::StreamFromReference,
            Policy::StreamZero => WarmStartPolicy::StreamFromZero,
        }
    }
}

#[derive(Args, Debug)]
struct CellArg {
    /// Cell file (TOML), or `default` for a seeded 64x16 tanh cell.
    #[arg(long, default_value = "default")]
    cell: String,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    cell: CellArg,
    /// Input frame: frame dump file (first line is used), or `default`.
    #[arg(long, default_value = "default")]
    input: String,
    #[arg(long, value_enum, default_value_t = Method::Broyden)]
    solver: Method,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Broyden memory (defaults to the iteration budget).
    #[arg(long)]
    memory: Option<usize>,
}

#[derive(Args, Debug)]
struct StreamArgs {
    #[command(flatten)]
    cell: CellArg,
    #[arg(long, value_enum)]
    policy: Policy,
    /// Constant iterations per frame.
    #[arg(long, conflicts_with = "schedule", required_unless_present = "schedule")]
    budget: Option<usize>,
    /// Comma-separated iterations for each frame.
    #[arg(long, value_delimiter = ',')]
    schedule: Option<Vec<usize>>,
    /// Number of frames.
    #[arg(long, default_value_t = 40)]
    frames: usize,
    /// Sequence preset, sequence spec file (.toml) or frame dump file.
    #[arg(long, default_value = "smooth-0.05")]
    sequence: String,
    /// Compute converged references and report distances to them.
    #[arg(long)]
    refs: bool,
    #[arg(long, value_enum, default_value_t = Method::Broyden)]
    solver: Method,
    /// Early-stop tolerance within a frame; 0 spends the whole budget.
    #[arg(long, default_value_t = 0.0)]
    tol: f64,
    /// Output CSV (default: stream.csv in $STREAMDEQ_OUT_DIR or the current directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SuiteName {
    Fig2,
    Fig3Ref,
    Fig3Zero,
    ShotChange,
    StaticEq,
}

impl SuiteName {
    fn name(self) -> &'static str {
        match self {
            SuiteName::Fig2 => "fig2",
            SuiteName::Fig3Ref => "fig3-ref",
            SuiteName::Fig3Zero => "fig3-zero",
            SuiteName::ShotChange => "shot-change",
            SuiteName::StaticEq => "static-eq",
        }
    }
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_enum, required_unless_present = "spec", conflicts_with = "spec")]
    suite: Option<SuiteName>,
    /// Experiment spec file (TOML) instead of a built-in suite.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Number of seeds, starting at --seed.
    #[arg(long, default_value_t = streamdeq::bench::DEFAULT_SEEDS)]
    seeds: usize,
    /// Output directory (default: the spec's out_dir, else bench-out).
    #[arg(long, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
    /// Also write per-frame solve times.
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Sequence preset or sequence spec file (.toml).
    #[arg(long, default_value = "smooth-0.05")]
    sequence: String,
    #[arg(long, default_value_t = 40)]
    frames: usize,
    /// Frame dimension for random-walk presets.
    #[arg(long, default_value_t = DEFAULT_DX)]
    dx: usize,
    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure carrying its exit status: 2 for bad usage, 1 otherwise.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let usage = error.chain().any(|e| {
            matches!(
                e.downcast_ref::<Error>(),
                Some(Error::ScheduleLength { .. } | Error::UnknownName { .. })
            )
        });
        Failure {
            code: if usage { 2 } else { 1 },
            error,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(cli.seed, args),
        Command::Stream(args) => cmd_stream(cli.seed, args),
        Command::Bench(args) => cmd_bench(cli.seed, args),
        Command::GenSequence(args) => cmd_gen(cli.seed, args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn load_cell(arg: &CellArg, seed: u64) -> anyhow::Result<EquilibriumCell> {
    if arg.cell == "default" {
        Ok(make_random_cell(seed, DEFAULT_DZ, DEFAULT_DX, streamdeq::cell::DEFAULT_GAMMA, ActivationKind::Tanh)?)
    } else {
        EquilibriumCell::load(&arg.cell).context("loading cell")
    }
}

fn cmd_solve(seed: u64, args: SolveArgs) -> Result<(), Failure> {
    let cell = load_cell(&args.cell, seed)?;
    let x = if args.input == "default" {
        let spec = SequenceSpec::random_walk(cell.dx(), 1, 0.0, seed + SEQUENCE_SEED_OFFSET);
        generate_sequence(&spec)?.remove(0)
    } else {
        read_frames(&args.input)?.into_iter().next().context("input file has no frames")?
    };
    let mut cfg = SolverConfig::new(args.solver.into(), args.iters, args.tol);
    if let Some(m) = args.memory {
        cfg = cfg.with_memory(m);
    }
    let z0 = Vector::zeros(cell.dz());
    let res = solve(&cell, &x, &z0, &cfg)?;
    let residual = match res.final_residual() {
        Some(r) => r,
        None => l2_norm(&cell.residual(&res.z, &x)?),
    };
    println!("solver: {}", cfg.method);
    println!("iterations: {}", res.iterations);
    println!("residual: {residual:.6e}");
    println!("converged: {}", res.converged);
    Ok(())
}

/// Frames from a preset name, a sequence spec file, or a frame dump.
fn load_frames(source: &str, frames: usize, dx: usize, seed: u64) -> anyhow::Result<Vec<Vector>> {
    if SequenceSpec::PRESETS.contains(&source) {
        return Ok(generate_sequence(&SequenceSpec::preset(source, dx, frames, seed + SEQUENCE_SEED_OFFSET)?)?);
    }
    let path = Path::new(source);
    if !path.exists() {
        return Err(Error::UnknownName {
            kind: "sequence preset or file",
            name: source.into(),
        }
        .into());
    }
    if path.extension().is_some_and(|e| e == "toml") {
        let mut spec = SequenceSpec::load(path)?;
        spec.length = frames;
        spec.validate()?;
        Ok(generate_sequence(&spec)?)
    } else {
        let mut all = read_frames(path)?;
        anyhow::ensure!(all.len() >= frames, "{source} holds {} frames, {frames} requested", all.len());
        all.truncate(frames);
        Ok(all)
    }
}

fn default_out(name: &str) -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_default().join(name)
}

fn cmd_stream(seed: u64, args: StreamArgs) -> Result<(), Failure> {
    let cell = load_cell(&args.cell, seed)?;
    let frames = load_frames(&args.sequence, args.frames, cell.dx(), seed)?;
    let schedule = match (&args.schedule, args.budget) {
        (Some(list), _) => BudgetSchedule::PerFrame(list.clone()),
        (None, Some(m)) => BudgetSchedule::Constant(m),
        (None, None) => unreachable!("clap requires --budget or --schedule"),
    };
    schedule.validate(frames.len())?;
    let policy: WarmStartPolicy = args.policy.into();
    let max_budget = (0..frames.len()).map(|t| schedule.budget(t)).max().unwrap_or(1);
    let cfg = SolverConfig::new(args.solver.into(), max_budget, args.tol);
    let opts = StreamOptions {
        compute_references: args.refs,
        retain_states: args.refs,
        record_timing: false,
    };
    let mut records = stream_infer(&cell, &frames, &policy, &schedule, &cfg, &opts)?;
    if args.refs {
        let head = ReadoutHead::new(seed + HEAD_SEED_OFFSET, DEFAULT_CLASSES.min(cell.dz()), &cell)?;
        fill_label_agreement(&mut records, &head)?;
    }
    let rows: Vec<MetricsRow> = records
        .iter()
        .map(|r| MetricsRow {
            experiment: "stream".into(),
            seed,
            policy: policy.label().into(),
            budget: schedule.label(),
            t: r.t,
            iterations_used: r.iterations_used,
            residual_norm: r.residual_norm,
            sq_dist_to_reference: r.sq_dist_to_reference,
            label_agreement: r.label_agreement,
        })
        .collect();
    let out = args.out.unwrap_or_else(|| default_out("stream.csv"));
    write_csv(&rows, &out)?;

    let total: usize = records.iter().map(|r| r.iterations_used).sum();
    println!("frames: {}", records.len());
    println!("iterations: {total}");
    if let Some(last) = records.last() {
        println!("final residual: {:.6e}", last.residual_norm);
    }
    if args.refs {
        let dists: Vec<f64> = records.iter().filter_map(|r| r.sq_dist_to_reference).collect();
        println!("mean squared distance to reference: {:.6e}", dists.iter().sum::<f64>() / dists.len() as f64);
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_bench(seed: u64, args: BenchArgs) -> Result<(), Failure> {
    let mut spec = match (&args.spec, args.suite) {
        (Some(path), _) => ExperimentSpec::load(path)?,
        (None, Some(suite)) => {
            let mut spec = SuiteRegistry::builtin().get(suite.name())?.default_spec(args.seeds);
            spec.seeds = (seed..seed + args.seeds as u64).collect();
            spec
        }
        (None, None) => unreachable!("clap requires --suite or --spec"),
    };
    spec.record_timing |= args.timing;
    let out_dir = args.out.clone().or_else(|| spec.out_dir.clone()).unwrap_or_else(|| PathBuf::from("bench-out"));
    let output = run_experiment(&spec)?;
    let files = output.write(&out_dir)?;
    println!("{} ({} seeds, budgets {:?})", spec.name, spec.seeds.len(), spec.budgets);
    for check in &output.checks {
        println!("{check}");
    }
    let passed = output.checks.iter().filter(|c| c.passed).count();
    println!("{passed}/{} checks passed", output.checks.len());
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_gen(seed: u64, args: GenArgs) -> Result<(), Failure> {
    let frames = load_frames(&args.sequence, args.frames, args.dx, seed)?;
    match &args.out {
        Some(path) => {
            write_frames(&frames, path)?;
            println!("wrote {} frames to {}", frames.len(), path.display());
        }
        None => print!("{}", streamdeq::sequence::frames_to_string(&frames)),
    }
    Ok(())
}
