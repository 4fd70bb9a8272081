//! `hcspmm`: command-line driver for the hybrid SpMM pipeline.
//!
//! Every run prints one JSON report on stdout (or to `--report`).
//! Diagnostics go to stderr. Exit codes: 0 ok, 1 usage, 2 input error,
//! 3 internal invariant violation.

mod commands;
mod input;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Bad user input: unreadable files, malformed specs, shape mismatches.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

/// A check the tool runs on its own results failed.
#[derive(Debug)]
pub struct InvariantViolation(pub String);

impl std::fmt::Display for InvariantViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InvariantViolation {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Parser)]
#[command(name = "hcspmm", version, about = "Row-window hybrid SpMM: analysis, path selection, reordering and benchmarks")]
struct Cli {
    /// Worker threads (default: available parallelism). 1 runs everything
    /// sequentially.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Seed for generators, random operands, grids and splits.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    /// Element type for SpMM and GNN runs.
    #[arg(long, global = true, value_enum, default_value_t = Precision::F64)]
    precision: Precision,

    /// Suppress diagnostics on stderr.
    #[arg(long, global = true)]
    quiet: bool,

    /// Include wall-clock seconds in the report. Off by default so reports
    /// are byte-identical across runs.
    #[arg(long, global = true)]
    timings: bool,

    /// Write the JSON report to this file instead of stdout.
    #[arg(long, global = true)]
    report: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize a Matrix Market file or edge list to Matrix Market.
    Convert(commands::ConvertArgs),
    /// Per-window features as CSV.
    PartitionReport(commands::PartitionArgs),
    /// Train the per-window path selector on synthetic windows.
    TrainSelector(commands::TrainArgs),
    /// Assign a path to every window of a matrix.
    Classify(commands::ClassifyArgs),
    /// Fit cost-model parameters to timings.
    Calibrate(commands::CalibrateArgs),
    /// Cost-model estimates over the density range of one window shape.
    Sweep(commands::SweepArgs),
    /// Sparse times dense product on the scalar, tile or hybrid path.
    Spmm(commands::SpmmArgs),
    /// Regroup vertices into dense windows and relabel the graph.
    Loa(commands::LoaArgs),
    /// Fused and unfused GNN layer, forward and backward.
    GnnBench(commands::GnnArgs),
    /// Partition, optional reordering, classification and hybrid SpMM.
    Pipeline(commands::PipelineArgs),
}

/// Settings shared by every subcommand.
#[derive(Debug, Clone, Copy)]
pub struct Ctx {
    pub seed: u64,
    pub precision: Precision,
    pub quiet: bool,
}

impl Ctx {
    pub fn warn(&self, msg: impl std::fmt::Display) {
        if !self.quiet {
            eprintln!("warning: {msg}");
        }
    }
}

/// Shared selector options.
#[derive(Debug, Clone, Args)]
pub struct SelectorArgs {
    /// Selector model JSON. Without it a model is trained on the default
    /// grid under the cost model.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Cost-model params JSON (default: the shipped parameters).
    #[arg(long)]
    pub params: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<InvariantViolation>() {
            return 3;
        }
        if cause.is::<InputError>() || cause.is::<std::io::Error>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<hcspmm_core::Error>() {
            return if e.is_invariant_violation() { 3 } else { 2 };
        }
    }
    3
}

/// The error chain joined by ": ", skipping causes the previous message
/// already ends with.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if out.ends_with(&msg) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&msg);
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(3);
        }
    }
    let ctx = Ctx {
        seed: cli.seed,
        precision: cli.precision,
        quiet: cli.quiet,
    };
    let result = match &cli.command {
        Command::Convert(a) => commands::convert(&ctx, a),
        Command::PartitionReport(a) => commands::partition_report(&ctx, a),
        Command::TrainSelector(a) => commands::train_selector(&ctx, a),
        Command::Classify(a) => commands::classify(&ctx, a),
        Command::Calibrate(a) => commands::calibrate(&ctx, a),
        Command::Sweep(a) => commands::sweep(&ctx, a),
        Command::Spmm(a) => commands::spmm(&ctx, a),
        Command::Loa(a) => commands::loa(&ctx, a),
        Command::GnnBench(a) => commands::gnn_bench(&ctx, a),
        Command::Pipeline(a) => commands::pipeline(&ctx, a),
    };
    let report = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            return ExitCode::from(exit_code(&e));
        }
    };
    let mut report = report;
    if !cli.timings {
        report.timings.clear();
    }
    report.input("seed", ctx.seed);
    report.input("precision", format!("{:?}", ctx.precision).to_lowercase());
    let json = report.to_json();
    match &cli.report {
        Some(path) => {
            if let Err(e) = std::fs::write(path, json + "\n") {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => println!("{json}"),
    }
    ExitCode::SUCCESS
}
