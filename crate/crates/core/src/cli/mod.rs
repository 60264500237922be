//! Command-line front end.
//!
//! Commands: `compress`, `sample-next`, `evaluate`, `plot`. Exit codes are
//! 0 on success, 2 for argument or target-spec errors, 3 for file errors and
//! 4 when the optimization produces a non-finite loss.

mod manifest;
pub mod svg;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use crate::diagnostics::{allocation_counts, min_pairwise_distance, DiagnosticsError, EnergyReference};
use crate::distributions::{DistributionError, SeededRng, TargetSpec};
use crate::hawc::{self, HawcConfig, HawcError, HistoryLedger, Initialization};
use crate::io::{read_point_table, render_points, write_atomic, write_points, PointFileError, PointTable};
use crate::kernel::{Kernel, DEFAULT_A};
use crate::measure::MeasureError;
use crate::optim::{Optimizer, StepSchedule};

pub use manifest::RunManifest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "hawc", version, about = "History-aware compression of distributions into Dirac points")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compress a target into K points, optionally accounting for a history file.
    Compress(CompressArgs),
    /// Emit new points one at a time, each avoiding the ones already in the ledger.
    SampleNext(SampleNextArgs),
    /// Score a point file against a target; prints one JSON object.
    Evaluate(EvaluateArgs),
    /// Write an SVG scatter plot of a point file.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScheduleArg {
    Anneal,
    Constant,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InitArg {
    Target,
    Origin,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Target draws per iteration.
    #[arg(long, default_value_t = 256)]
    pub batch: usize,
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    /// Base step size.
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    #[arg(long = "kernel-a", default_value_t = DEFAULT_A)]
    pub kernel_a: f64,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    pub optimizer: OptimizerArg,
    #[arg(long, value_enum, default_value_t = ScheduleArg::Anneal)]
    pub schedule: ScheduleArg,
    #[arg(long, value_enum, default_value_t = InitArg::Target)]
    pub init: InitArg,
}

impl SolverArgs {
    fn config(&self, k: usize) -> HawcConfig {
        HawcConfig {
            k,
            batch_size: self.batch,
            iterations: self.iters,
            step_size: self.step,
            optimizer: match self.optimizer {
                OptimizerArg::Adam => Optimizer::adam(),
                OptimizerArg::Sgd => Optimizer::PlainSgd,
            },
            schedule: match self.schedule {
                ScheduleArg::Anneal => StepSchedule::Anneal,
                ScheduleArg::Constant => StepSchedule::Constant,
            },
            kernel_a: self.kernel_a,
            seed: self.seed,
            init: match self.init {
                InitArg::Target => Initialization::FromTarget,
                InitArg::Origin => Initialization::Origin,
            },
        }
    }
}

const SOLVER_FLAGS: [&str; 8] = [
    "seed", "batch", "iters", "step", "kernel_a", "optimizer", "schedule", "init",
];

#[derive(Debug, Args)]
pub struct CompressArgs {
    /// Target spec: gaussian:dim=N | grid:rows=R,cols=C,spacing=S,sigma=SIGMA | csv:PATH
    #[arg(long, conflicts_with = "manifest")]
    pub target: Option<TargetSpec>,
    /// Number of points to produce.
    #[arg(long, conflicts_with = "manifest")]
    pub k: Option<usize>,
    /// Ledger (or point file) of previously emitted points.
    #[arg(long, conflicts_with = "manifest")]
    pub history: Option<PathBuf>,
    /// Output point CSV; the manifest and loss trace are written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Re-run the configuration recorded in a manifest.
    #[arg(long, conflicts_with_all = SOLVER_FLAGS)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct SampleNextArgs {
    #[arg(long, conflicts_with = "manifest")]
    pub target: Option<TargetSpec>,
    /// Ledger file; created when absent.
    #[arg(long, conflicts_with = "manifest")]
    pub history: Option<PathBuf>,
    /// Number of points to emit.
    #[arg(long, conflicts_with = "manifest")]
    pub count: Option<usize>,
    /// Also write the newly emitted points to this point CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Re-run a recorded invocation; the ledger must be in its recorded starting state.
    #[arg(long, conflicts_with_all = SOLVER_FLAGS)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Point or ledger CSV to score.
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long)]
    pub target: TargetSpec,
    /// Target draws used by the Monte-Carlo distance.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "kernel-a", default_value_t = DEFAULT_A)]
    pub kernel_a: f64,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub points: PathBuf,
    /// Point CSV drawn as red center markers.
    #[arg(long, conflicts_with = "target")]
    pub centers: Option<PathBuf>,
    /// Take the centers from a grid target spec.
    #[arg(long)]
    pub target: Option<TargetSpec>,
    /// Label each point with its emission index (ledger files) or row number.
    #[arg(long)]
    pub labels: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    File(#[from] PointFileError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: invalid manifest: {source}")]
    Manifest { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Hawc(#[from] HawcError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) | Self::Diagnostics(_) => EXIT_USAGE,
            Self::File(_) | Self::Io { .. } | Self::Manifest { .. } => EXIT_IO,
            Self::Distribution(e) => match e {
                DistributionError::File(_) | DistributionError::EmptyFile { .. } => EXIT_IO,
                _ => EXIT_USAGE,
            },
            Self::Hawc(e) => match e {
                HawcError::NonFinite { .. } | HawcError::Measure(MeasureError::NegativeDistance(_)) => {
                    EXIT_NUMERIC
                }
                HawcError::LedgerIndex { .. } => EXIT_IO,
                _ => EXIT_USAGE,
            },
        }
    }
}

/// Entry point for the binary.
pub fn main() -> i32 {
    let stdout = std::io::stdout();
    run(std::env::args_os(), &mut stdout.lock())
}

/// Parses `args` (including the program name), runs the command, and returns
/// the process exit code. Command output goes to `out`; errors go to stderr.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Compress(a) => cmd_compress(a),
        Command::SampleNext(a) => cmd_sample_next(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::Plot(a) => cmd_plot(a),
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|source| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })
}

/// `pts.csv` -> `pts.<suffix>`
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

/// History for `compress`: a ledger or a plain point file.
fn load_history(path: &Path) -> Result<HistoryLedger, CliError> {
    let table = read_point_table(path)?;
    Ok(match table.indices {
        Some(indices) => HistoryLedger::from_indexed(&indices, table.points)?,
        None => HistoryLedger::from_points(table.points)?,
    })
}

fn cmd_compress(a: CompressArgs) -> Result<(), CliError> {
    let (spec, config, history, out) = match &a.manifest {
        Some(path) => {
            let m = RunManifest::load(path)?;
            m.expect_command("compress")?;
            let out = a
                .out
                .clone()
                .or(m.points_out.clone())
                .ok_or_else(|| usage("manifest records no output path; pass --out"))?;
            (m.target_spec()?, m.config, m.history, out)
        }
        None => {
            let spec = a.target.clone().ok_or_else(|| usage("--target is required"))?;
            let k = a.k.ok_or_else(|| usage("--k is required"))?;
            let out = a.out.clone().ok_or_else(|| usage("--out is required"))?;
            (spec, a.solver.config(k), a.history.clone(), out)
        }
    };
    config.validate()?;
    let target = spec.resolve()?;
    let ledger = match &history {
        Some(path) => load_history(path)?,
        None => HistoryLedger::new(),
    };

    let result = hawc::compress(&target, &ledger, &config)?;

    let manifest_path = sibling(&out, "manifest.json");
    let trace_path = sibling(&out, "loss.csv");
    write_points(&out, &result.points, target.dim())?;
    let mut trace = String::from("iteration,loss\n");
    for (i, l) in result.loss_trace.iter().enumerate() {
        trace.push_str(&format!("{i},{l}\n"));
    }
    write_atomic(&trace_path, &trace)?;
    let manifest = RunManifest {
        command: "compress".into(),
        target: spec.to_string(),
        config,
        history,
        history_rows_before: ledger.len(),
        count: None,
        points_out: Some(out),
        loss_trace_out: Some(trace_path),
        ..RunManifest::default()
    };
    manifest.save(&manifest_path)
}

fn cmd_sample_next(a: SampleNextArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (spec, config, ledger_path, count, expected_rows) = match &a.manifest {
        Some(path) => {
            let m = RunManifest::load(path)?;
            m.expect_command("sample-next")?;
            let ledger = m
                .history
                .clone()
                .ok_or_else(|| usage("manifest records no ledger path"))?;
            let count = m.count.ok_or_else(|| usage("manifest records no count"))?;
            (m.target_spec()?, m.config, ledger, count, Some(m.history_rows_before))
        }
        None => {
            let spec = a.target.clone().ok_or_else(|| usage("--target is required"))?;
            let ledger = a.history.clone().ok_or_else(|| usage("--history is required"))?;
            (spec, a.solver.config(1), ledger, a.count.unwrap_or(1), None)
        }
    };
    if count == 0 {
        return Err(usage("--count must be >= 1"));
    }
    config.validate()?;
    let target = spec.resolve()?;

    let (mut ledger, stored_dim) = if ledger_path.exists() {
        let table = read_point_table(&ledger_path)?;
        let PointTable { indices, points, dim } = table;
        let indices = indices.ok_or_else(|| PointFileError::BadHeader {
            path: ledger_path.clone(),
            header: "(ledger files start with `index,dim0,...`)".into(),
        })?;
        (HistoryLedger::from_indexed(&indices, points)?, Some(dim))
    } else {
        (HistoryLedger::new(), None)
    };
    if let Some(dim) = stored_dim {
        if dim != target.dim() {
            return Err(usage(format!(
                "{} holds {dim}-dimensional points but the target is {}-dimensional",
                ledger_path.display(),
                target.dim()
            )));
        }
    }
    if let Some(rows) = expected_rows {
        if rows != ledger.len() {
            return Err(usage(format!(
                "{} has {} rows but the manifest was recorded with {rows}; restore the ledger to replay",
                ledger_path.display(),
                ledger.len()
            )));
        }
    }

    let rows_before = ledger.len();
    let dim = target.dim();
    let mut emitted = Vec::with_capacity(count);
    for _ in 0..count {
        let index = ledger.len() as u64 + 1;
        let point = hawc::sample_next(&target, &ledger, &hawc::step_config(&config, index))?;
        ledger.push(point.clone())?;
        write_atomic(
            &ledger_path,
            &render_points(ledger.points(), Some(&ledger.indices()), dim),
        )?;
        let row: Vec<String> = point.iter().map(|v| format!("{v}")).collect();
        write_out(out, &format!("{index},{}\n", row.join(",")))?;
        emitted.push(point);
    }
    if let Some(path) = &a.out {
        write_points(path, &emitted, dim)?;
    }

    let manifest = RunManifest {
        command: "sample-next".into(),
        target: spec.to_string(),
        config,
        history: Some(ledger_path.clone()),
        history_rows_before: rows_before,
        count: Some(count),
        points_out: a.out.clone(),
        loss_trace_out: None,
        ..RunManifest::default()
    };
    manifest.save(&sibling(&ledger_path, "manifest.json"))
}

/// JSON line printed by `evaluate`.
#[derive(Debug, Serialize)]
pub struct Evaluation {
    pub energy_distance_sq: f64,
    pub min_pairwise_distance: Option<f64>,
    pub allocation_counts: Option<Vec<usize>>,
}

fn cmd_evaluate(a: EvaluateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let kernel = Kernel::try_new(a.kernel_a).ok_or_else(|| usage("--kernel-a must be finite and >= 0"))?;
    if a.samples < 2 {
        return Err(usage("--samples must be >= 2"));
    }
    let target = a.target.resolve()?;
    let table = read_point_table(&a.points)?;
    if table.points.is_empty() {
        return Err(PointFileError::Empty { path: a.points.clone() }.into());
    }
    if table.dim != target.dim() {
        return Err(usage(format!(
            "points are {}-dimensional but the target is {}-dimensional",
            table.dim,
            target.dim()
        )));
    }
    let points = table.points;
    let mut rng = SeededRng::new(a.seed);
    let reference = EnergyReference::new(target.sample(a.samples, &mut rng), kernel)?;
    let eval = Evaluation {
        energy_distance_sq: reference.distance_sq(&points)?,
        min_pairwise_distance: min_pairwise_distance(&points).ok(),
        allocation_counts: target.grid_centers().map(|c| allocation_counts(&points, &c)),
    };
    let line = serde_json::to_string(&eval).expect("evaluation serializes");
    write_out(out, &format!("{line}\n"))
}

fn cmd_plot(a: PlotArgs) -> Result<(), CliError> {
    let table = read_point_table(&a.points)?;
    if table.points.is_empty() {
        return Err(PointFileError::Empty { path: a.points.clone() }.into());
    }
    let centers = match (&a.centers, &a.target) {
        (Some(path), _) => read_point_table(path)?.points,
        (None, Some(spec)) => spec.resolve()?.grid_centers().unwrap_or_default(),
        (None, None) => Vec::new(),
    };
    let labels: Option<Vec<u64>> = a.labels.then(|| {
        table
            .indices
            .clone()
            .unwrap_or_else(|| (1..=table.points.len() as u64).collect())
    });
    let svg = svg::scatter(&table.points, &centers, labels.as_deref());
    write_atomic(&a.out, &svg)?;
    Ok(())
}
