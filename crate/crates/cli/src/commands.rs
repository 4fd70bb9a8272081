//! Subcommand implementations. Each returns the run's report.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use hcspmm_core::exec::{Assignment, WindowedMatrix};
use hcspmm_core::gnn::{self, FusionMode, GnnLayer, GnnPlan, Normalization};
use hcspmm_core::loa::{self, WindowGrouping};
use hcspmm_core::matrix::io::{load_matrix_market, write_dense_csv, write_matrix_market};
use hcspmm_core::perf::{self, CalibrationSample, CostParams, CsvTimings, ParamsFile, Provenance, TimingProvider};
use hcspmm_core::select::{self, GridPoint, Optimizer, SelectorModel, TrainConfig};
use hcspmm_core::window::{save_partition_csv, TILE_COLS};
use hcspmm_core::{
    generate, partition, spmm_dense_oracle, spmm_hybrid, spmm_scalar, spmm_tile, DenseMatrix, ExecPath, Graph,
    PathStats, RowWindow, Scalar, SparseCsr, WINDOW_HEIGHT,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::input::{is_matrix_market, load_dense, load_graph, load_matrix};
use crate::report::RunReport;
use crate::{Ctx, InputError, InvariantViolation, Precision, SelectorArgs};

// ---------------------------------------------------------------- shared

fn load_params(path: Option<&Path>) -> Result<ParamsFile> {
    match path {
        Some(p) => Ok(ParamsFile::load(p)?),
        None => Ok(ParamsFile::defaults()),
    }
}

fn load_model(ctx: &Ctx, sel: &SelectorArgs, report: &mut RunReport) -> Result<SelectorModel> {
    let params = load_params(sel.params.as_deref())?;
    for w in params.params.sanity_warnings() {
        ctx.warn(w);
    }
    report.input("params", sel.params.as_ref().map_or("default".into(), |p| p.display().to_string()));
    match &sel.model {
        Some(path) => {
            report.input("model", path.display());
            Ok(SelectorModel::load(path)?)
        }
        None => {
            report.input("model", "default");
            Ok(select::default_model(&params.params, ctx.seed)?)
        }
    }
}

fn mean_ci<T: Scalar>(windows: &[RowWindow<T>]) -> f64 {
    let ci: Vec<f64> = windows
        .iter()
        .filter(|w| !w.is_empty())
        .map(|w| w.features().computing_intensity)
        .collect();
    if ci.is_empty() {
        0.0
    } else {
        ci.iter().sum::<f64>() / ci.len() as f64
    }
}

fn write_lines(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "{header}")?;
    for r in rows {
        writeln!(w, "{r}")?;
    }
    w.flush()?;
    Ok(())
}

fn stats_metrics(report: &mut RunReport, s: &PathStats) {
    report
        .count("windows_scalar", s.windows_scalar)
        .count("windows_tile", s.windows_tile)
        .count("windows_empty", s.windows_empty)
        .count("entries_scalar", s.entries_scalar)
        .count("entries_tile", s.entries_tile)
        .count("tiles", s.tiles);
}

/// Sum of all entries, accumulated sequentially in f64.
fn checksum<T: Scalar>(z: &DenseMatrix<T>) -> f64 {
    z.data().iter().fold(0.0, |acc, v| acc + Scalar::to_f64(*v))
}

// ---------------------------------------------------------------- convert

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InFormat {
    Mtx,
    Edgelist,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Input file.
    #[arg(long, alias = "in")]
    input: PathBuf,
    /// Input format (default: from the extension).
    #[arg(long, value_enum)]
    format: Option<InFormat>,
    /// Treat edge-list pairs as directed edges.
    #[arg(long)]
    directed: bool,
    /// Output Matrix Market file.
    #[arg(long)]
    out: PathBuf,
}

pub fn convert(ctx: &Ctx, a: &ConvertArgs) -> Result<RunReport> {
    let _ = ctx;
    let mut report = RunReport::new("convert");
    let format = a.format.unwrap_or(if is_matrix_market(&a.input) {
        InFormat::Mtx
    } else {
        InFormat::Edgelist
    });
    report
        .input("input", a.input.display())
        .input("format", format!("{format:?}").to_lowercase())
        .input("directed", a.directed);
    let csr = match format {
        InFormat::Mtx => load_matrix_market(&a.input)?,
        InFormat::Edgelist => {
            let el = hcspmm_core::matrix::io::load_edge_list(&a.input, !a.directed)?;
            report.flag("one_based", el.one_based);
            el.graph.into_adjacency()
        }
    };
    write_matrix_market(&csr, &a.out)?;
    report
        .output("matrix", &a.out)
        .count("num_vertices", csr.num_rows())
        .count("num_cols", csr.num_cols())
        .count("nnz", csr.nnz());
    Ok(report)
}

// ---------------------------------------------------------------- partition-report

#[derive(Debug, Args)]
pub struct PartitionArgs {
    /// Matrix Market file, edge list or generator spec.
    #[arg(long, alias = "graph")]
    matrix: String,
    /// Rows per window.
    #[arg(long, default_value_t = WINDOW_HEIGHT)]
    height: usize,
    /// Per-window CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn partition_report(ctx: &Ctx, a: &PartitionArgs) -> Result<RunReport> {
    let mut report = RunReport::new("partition-report");
    report.input("matrix", &a.matrix).input("height", a.height);
    let csr = load_matrix(&a.matrix, ctx.seed)?;
    let windows = partition(&csr, a.height)?;
    if let Some(out) = &a.out {
        save_partition_csv(&windows, out)?;
        report.output("partition", out);
    }
    let nonempty: Vec<_> = windows.iter().filter(|w| !w.is_empty()).map(|w| w.features()).collect();
    let k = nonempty.len().max(1) as f64;
    report
        .count("windows", windows.len())
        .count("windows_empty", windows.len() - nonempty.len())
        .count("nnz", csr.nnz())
        .metric("mean_ci", mean_ci(&windows))
        .metric("mean_density", nonempty.iter().map(|f| f.density).sum::<f64>() / k)
        .metric("mean_ncols", nonempty.iter().map(|f| f.ncols as f64).sum::<f64>() / k)
        .count("max_ncols", nonempty.iter().map(|f| f.ncols).max().unwrap_or(0))
        .count("tiles", windows.iter().map(|w| w.tile_count(TILE_COLS)).sum());
    Ok(report)
}

// ---------------------------------------------------------------- train-selector

fn parse_grid(spec: &str, seed: u64) -> Result<Vec<GridPoint>> {
    Ok(match spec {
        "default" => select::default_grid(seed),
        "coarse" => select::coarse_grid(seed),
        "full" => select::full_grid(seed),
        other => match other.strip_prefix("random:").map(str::parse::<usize>) {
            Some(Ok(n)) if n > 0 => select::random_grid(n, seed),
            _ => bail!(InputError(format!(
                "unknown grid '{other}' (expected default, coarse, full or random:N)"
            ))),
        },
    })
}

fn parse_provider(spec: &str, params: &CostParams, repeats: usize, seed: u64) -> Result<TimingProvider> {
    Ok(match spec {
        "cost-model" | "analytic" => TimingProvider::Analytic(*params),
        "measured" => TimingProvider::MeasuredCpu { repeats, seed },
        other => match other.strip_prefix("csv:") {
            Some(path) => TimingProvider::ExternalCsv(CsvTimings::load(path)?),
            None => bail!(InputError(format!(
                "unknown provider '{other}' (expected cost-model, measured or csv:PATH)"
            ))),
        },
    })
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// default, coarse, full or random:N.
    #[arg(long, default_value = "default")]
    grid: String,
    /// cost-model, measured or csv:PATH.
    #[arg(long, default_value = "cost-model")]
    provider: String,
    /// Params for the cost-model provider.
    #[arg(long)]
    params: Option<PathBuf>,
    /// newton or gd.
    #[arg(long, default_value = "newton")]
    optimizer: String,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = 50_000)]
    epochs: usize,
    /// Provider calls averaged per sample (measured: runs per path).
    #[arg(long, default_value_t = 100)]
    repeats: usize,
    #[arg(long, default_value_t = select::DEFAULT_DIM)]
    dim: usize,
    /// Fraction of samples held out for the accuracy metric.
    #[arg(long, default_value_t = 0.2)]
    holdout: f64,
    /// Model JSON.
    #[arg(long)]
    out: PathBuf,
}

pub fn train_selector(ctx: &Ctx, a: &TrainArgs) -> Result<RunReport> {
    let mut report = RunReport::new("train-selector");
    if !(0.0..1.0).contains(&a.holdout) {
        bail!(InputError(format!("--holdout must be in [0, 1), got {}", a.holdout)));
    }
    let params = load_params(a.params.as_deref())?.params;
    let optimizer: Optimizer = a.optimizer.parse().map_err(|e| InputError(format!("{e}")))?;
    let grid = parse_grid(&a.grid, ctx.seed)?;
    // the measured provider repeats inside each call
    let provider = parse_provider(&a.provider, &params, a.repeats, ctx.seed)?;
    let calls = if provider.is_measured() { 1 } else { a.repeats.max(1) };
    report
        .input("grid", &a.grid)
        .input("provider", &a.provider)
        .input("optimizer", optimizer.as_str())
        .input("learning_rate", a.learning_rate)
        .input("epochs", a.epochs)
        .input("repeats", a.repeats)
        .input("dim", a.dim)
        .input("holdout", a.holdout);

    let t0 = Instant::now();
    let samples = select::collect_samples(&grid, &provider, calls, a.dim)?;
    report.timing("collect_seconds", t0.elapsed().as_secs_f64());
    let (train, test) = select::split(&samples, a.holdout, ctx.seed);
    let cfg = TrainConfig {
        optimizer,
        learning_rate: a.learning_rate,
        max_epochs: a.epochs,
        ..TrainConfig::default()
    };
    let t1 = Instant::now();
    let (model, summary) = select::fit(&train, &cfg)?;
    report.timing("fit_seconds", t1.elapsed().as_secs_f64());
    if !summary.converged {
        ctx.warn(format!("training stopped after {} epochs without converging", summary.epochs));
    }
    model.save(&a.out)?;
    let (rw_n, rw_d, rb) = model.raw_coefficients();
    report
        .output("model", &a.out)
        .count("samples", samples.len())
        .count("samples_train", train.len())
        .count("samples_holdout", test.len())
        .count("labels_scalar", samples.iter().filter(|s| s.label == 1).count())
        .metric("train_accuracy", select::accuracy(&model, &train))
        .count("epochs", summary.epochs)
        .metric("final_loss", summary.final_loss)
        .flag("converged", summary.converged)
        .metric("w_ncols", model.w_ncols)
        .metric("w_density", model.w_density)
        .metric("bias", model.bias)
        .metric("raw_w_ncols", rw_n)
        .metric("raw_w_density", rw_d)
        .metric("raw_bias", rb);
    if !test.is_empty() {
        report.metric("holdout_accuracy", select::accuracy(&model, &test));
    }
    Ok(report)
}

// ---------------------------------------------------------------- classify

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    selector: SelectorArgs,
    #[arg(long, alias = "graph")]
    matrix: String,
    /// Assignment CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn classify(ctx: &Ctx, a: &ClassifyArgs) -> Result<RunReport> {
    let mut report = RunReport::new("classify");
    report.input("matrix", &a.matrix);
    let model = load_model(ctx, &a.selector, &mut report)?;
    let csr = load_matrix(&a.matrix, ctx.seed)?;
    let windows = partition(&csr, WINDOW_HEIGHT)?;
    let assignment = select::assign(&model, &windows);
    if let Some(out) = &a.out {
        select::write_assignment_csv(&windows, &assignment, out)?;
        report.output("assignment", out);
    }
    let empty = windows.iter().filter(|w| w.is_empty()).count();
    let tile = assignment.count(ExecPath::Tile);
    report
        .count("windows", windows.len())
        .count("windows_tile", tile)
        .count("windows_scalar", windows.len() - tile - empty)
        .count("windows_empty", empty);
    Ok(report)
}

// ---------------------------------------------------------------- calibrate

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// measured, cost-model or csv:PATH.
    #[arg(long, default_value = "measured")]
    provider: String,
    /// Params for the cost-model provider.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Windows to time: default, coarse, full or random:N. Ignored for csv.
    #[arg(long, default_value = "random:400")]
    grid: String,
    /// Runs per path and window for the measured provider.
    #[arg(long, default_value_t = 100)]
    repeats: usize,
    #[arg(long, default_value_t = select::DEFAULT_DIM)]
    dim: usize,
    /// Fraction of samples kept out of the fit for the holdout R^2.
    #[arg(long, default_value_t = 0.25)]
    holdout: f64,
    /// Params JSON.
    #[arg(long)]
    out: PathBuf,
}

pub fn calibrate(ctx: &Ctx, a: &CalibrateArgs) -> Result<RunReport> {
    let mut report = RunReport::new("calibrate");
    if !(0.0..1.0).contains(&a.holdout) {
        bail!(InputError(format!("--holdout must be in [0, 1), got {}", a.holdout)));
    }
    let base = load_params(a.params.as_deref())?.params;
    let provider = parse_provider(&a.provider, &base, a.repeats, ctx.seed)?;
    report
        .input("provider", &a.provider)
        .input("repeats", a.repeats)
        .input("dim", a.dim)
        .input("holdout", a.holdout);

    let t0 = Instant::now();
    let mut samples: Vec<CalibrationSample> = match &provider {
        TimingProvider::ExternalCsv(t) => t
            .rows()
            .iter()
            .map(|r| {
                let nnz = (r.density * (WINDOW_HEIGHT * r.ncols) as f64).round() as usize;
                CalibrationSample {
                    features: hcspmm_core::WindowFeatures::from_counts(nnz, r.ncols, WINDOW_HEIGHT),
                    dim: a.dim,
                    t_scalar: Some(r.t_scalar),
                    t_tile: Some(r.t_tile),
                }
            })
            .collect(),
        _ => {
            report.input("grid", &a.grid);
            let grid = parse_grid(&a.grid, ctx.seed)?;
            let windows = grid
                .par_iter()
                .map(|p| select::generate_synthetic(p.ncols, p.nnz, p.seed))
                .collect::<hcspmm_core::Result<Vec<_>>>()?;
            let times = provider.time_many(&windows, a.dim)?;
            windows
                .iter()
                .zip(times)
                .map(|(w, (ts, tt))| CalibrationSample {
                    features: w.features(),
                    dim: a.dim,
                    t_scalar: Some(ts),
                    t_tile: Some(tt),
                })
                .collect()
        }
    };
    report.timing("timing_seconds", t0.elapsed().as_secs_f64());

    samples.shuffle(&mut ChaCha8Rng::seed_from_u64(ctx.seed));
    let cut = samples.len() - (samples.len() as f64 * a.holdout).round() as usize;
    let (fit_set, held) = samples.split_at(cut);
    let cal = perf::calibrate(fit_set)?;
    for w in &cal.warnings {
        ctx.warn(w);
    }
    let file = ParamsFile {
        version: perf::PARAMS_FORMAT_VERSION.to_string(),
        params: cal.params,
        provenance: Provenance {
            provider: provider.name().to_string(),
            date: chrono::Local::now().format("%Y-%m-%d").to_string(),
            sample_count: fit_set.len(),
        },
    };
    file.save(&a.out)?;
    let p = cal.params;
    report
        .output("params", &a.out)
        .count("samples", samples.len())
        .count("samples_fit", fit_set.len())
        .count("samples_holdout", held.len())
        .metric("alpha_scalar", p.alpha_scalar)
        .metric("beta_scalar", p.beta_scalar)
        .metric("alpha_tile", p.alpha_tile)
        .metric("beta_tile", p.beta_tile)
        .metric("gamma_tile", p.gamma_tile)
        .metric("r2_scalar", cal.r2_scalar)
        .metric("r2_tile", cal.r2_tile)
        .count("warnings", cal.warnings.len());
    if !held.is_empty() {
        let (hs, ht) = perf::goodness_of_fit(&p, held);
        report.metric("holdout_r2_scalar", hs).metric("holdout_r2_tile", ht);
    }
    Ok(report)
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    ncols: usize,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    /// Sweep CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn sweep(ctx: &Ctx, a: &SweepArgs) -> Result<RunReport> {
    let mut report = RunReport::new("sweep");
    if a.ncols == 0 {
        bail!(InputError("--ncols must be at least 1".into()));
    }
    let params = load_params(a.params.as_deref())?.params;
    for w in params.sanity_warnings() {
        ctx.warn(w);
    }
    report
        .input("params", a.params.as_ref().map_or("default".into(), |p| p.display().to_string()))
        .input("ncols", a.ncols)
        .input("dim", a.dim);
    let points = perf::density_sweep(&params, a.ncols, a.dim);
    if let Some(out) = &a.out {
        perf::write_sweep_csv(&points, out)?;
        report.output("sweep", out);
    }
    let tile_min = points.iter().map(|p| p.t_tile).fold(f64::INFINITY, f64::min);
    let tile_max = points.iter().map(|p| p.t_tile).fold(f64::NEG_INFINITY, f64::max);
    let crossover = perf::density_crossover(&params, a.ncols, a.dim);
    report
        .count("points", points.len())
        .flag("has_crossover", crossover.is_some())
        .metric("tile_spread", tile_max - tile_min);
    if let Some(c) = crossover {
        report.metric("crossover_density", c);
    }
    Ok(report)
}

// ---------------------------------------------------------------- spmm

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Scalar,
    Tile,
    Hybrid,
}

#[derive(Debug, Args)]
pub struct SpmmArgs {
    #[command(flatten)]
    selector: SelectorArgs,
    #[arg(long, alias = "graph")]
    matrix: String,
    /// random:dim=D[,seed=S] or a CSV file with one row per column of the
    /// sparse matrix.
    #[arg(long, default_value = "random:dim=32")]
    dense: String,
    #[arg(long, value_enum, default_value_t = Mode::Hybrid)]
    mode: Mode,
    /// Result CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Path statistics JSON.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Compare against the dense reference product; exit 3 on mismatch.
    #[arg(long)]
    check: bool,
}

pub fn spmm(ctx: &Ctx, a: &SpmmArgs) -> Result<RunReport> {
    let mut report = RunReport::new("spmm");
    report
        .input("matrix", &a.matrix)
        .input("dense", &a.dense)
        .input("mode", format!("{:?}", a.mode).to_lowercase());
    let csr = load_matrix(&a.matrix, ctx.seed)?;
    let x = load_dense(&a.dense, csr.num_cols(), ctx.seed)?;
    let assignment = if a.mode == Mode::Hybrid {
        let model = load_model(ctx, &a.selector, &mut report)?;
        Some(select::assign(&model, &partition(&csr, WINDOW_HEIGHT)?))
    } else {
        None
    };
    match ctx.precision {
        Precision::F64 => run_spmm(a, &csr, &x, assignment.as_ref(), 1e-12, &mut report)?,
        Precision::F32 => run_spmm(a, &csr.cast::<f32>(), &x.cast::<f32>(), assignment.as_ref(), 1e-5, &mut report)?,
    }
    Ok(report)
}

fn run_spmm<T: Scalar>(
    a: &SpmmArgs,
    csr: &SparseCsr<T>,
    x: &DenseMatrix<T>,
    assignment: Option<&Assignment>,
    tol: f64,
    report: &mut RunReport,
) -> Result<()> {
    let t0 = Instant::now();
    let res = match a.mode {
        Mode::Scalar => spmm_scalar(csr, x)?,
        Mode::Tile => spmm_tile(&WindowedMatrix::new(csr, WINDOW_HEIGHT)?, x)?,
        Mode::Hybrid => spmm_hybrid(
            &WindowedMatrix::new(csr, WINDOW_HEIGHT)?,
            assignment.expect("hybrid mode has an assignment"),
            x,
        )?,
    };
    report.timing("spmm_seconds", t0.elapsed().as_secs_f64());
    stats_metrics(report, &res.stats);
    report
        .count("rows", res.z.rows())
        .count("dim", res.z.dim())
        .count("nnz", csr.nnz())
        .metric("checksum", checksum(&res.z));
    if let Some(out) = &a.out {
        write_dense_csv(&res.z, out)?;
        report.output("result", out);
    }
    if let Some(path) = &a.stats {
        let json = serde_json::to_string_pretty(&res.stats)?;
        std::fs::write(path, json + "\n").with_context(|| format!("cannot write {}", path.display()))?;
        report.output("stats", path);
    }
    if a.check {
        let oracle = spmm_dense_oracle(csr, x)?;
        let err = res.z.max_rel_err(&oracle);
        report.metric("max_rel_err", err);
        if !(err <= tol) {
            bail!(InvariantViolation(format!(
                "result differs from the reference product: relative error {err:e} > {tol:e}"
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- loa

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LoaVariant {
    Optimized,
    Basic,
}

#[derive(Debug, Args)]
pub struct LoaArgs {
    #[command(flatten)]
    selector: SelectorArgs,
    /// Undirected graph: Matrix Market, edge list or generator spec.
    #[arg(long, alias = "matrix")]
    graph: String,
    /// Vertices scanned when scoring candidates for a window.
    #[arg(long, default_value_t = loa::DEFAULT_VW)]
    vw: usize,
    #[arg(long, value_enum, default_value_t = LoaVariant::Optimized)]
    variant: LoaVariant,
    /// Relabel the graph with this seed before reordering.
    #[arg(long)]
    scramble: Option<u64>,
    /// Reordered Matrix Market file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV of old_id,new_id.
    #[arg(long)]
    perm: Option<PathBuf>,
    /// CSV of per-window features before and after.
    #[arg(long)]
    windows: Option<PathBuf>,
}

fn build_grouping(g: &Graph, vw: usize, variant: LoaVariant) -> Result<WindowGrouping> {
    Ok(match variant {
        LoaVariant::Optimized => loa::build_windows_optimized(g, vw)?,
        LoaVariant::Basic => loa::build_windows_basic(g, vw)?,
    })
}

fn undirected(g: Graph, what: &str) -> Result<Graph> {
    if !g.is_undirected() {
        bail!(InputError(format!("{what}: reordering needs an undirected graph (symmetric pattern)")));
    }
    Ok(g)
}

fn scrambled(g: Graph, seed: Option<u64>, report: &mut RunReport) -> Result<Graph> {
    match seed {
        Some(s) => {
            report.input("scramble", s);
            Ok(generate::scramble(&g, s)?.0)
        }
        None => Ok(g),
    }
}

pub fn loa(ctx: &Ctx, a: &LoaArgs) -> Result<RunReport> {
    let mut report = RunReport::new("loa");
    if a.vw == 0 {
        bail!(InputError("--vw must be at least 1".into()));
    }
    report
        .input("graph", &a.graph)
        .input("vw", a.vw)
        .input("variant", format!("{:?}", a.variant).to_lowercase());
    let model = load_model(ctx, &a.selector, &mut report)?;
    let g = undirected(load_graph(&a.graph, false, ctx.seed)?, &a.graph)?;
    let g = scrambled(g, a.scramble, &mut report)?;

    let before = partition(g.adjacency(), WINDOW_HEIGHT)?;
    let t0 = Instant::now();
    let grouping = build_grouping(&g, a.vw, a.variant)?;
    report.timing("loa_seconds", t0.elapsed().as_secs_f64());
    let (h, perm) = loa::reorder(&g, &grouping)?;
    let after = partition(h.adjacency(), WINDOW_HEIGHT)?;
    if h.num_entries() != g.num_entries() {
        bail!(InvariantViolation("reordering changed the number of entries".into()));
    }

    let tile_before = select::assign(&model, &before).count(ExecPath::Tile);
    let tile_after = select::assign(&model, &after).count(ExecPath::Tile);
    if let Some(out) = &a.out {
        write_matrix_market(h.adjacency(), out)?;
        report.output("matrix", out);
    }
    if let Some(path) = &a.perm {
        write_lines(
            path,
            "old_id,new_id",
            perm.as_slice().iter().enumerate().map(|(o, n)| format!("{o},{n}")),
        )?;
        report.output("perm", path);
    }
    if let Some(path) = &a.windows {
        write_lines(
            path,
            "window_id,ci_before,ci_after,path_before,path_after",
            before.iter().zip(&after).map(|(b, w)| {
                let (fb, fa) = (b.features(), w.features());
                format!(
                    "{},{},{},{},{}",
                    b.window_id(),
                    fb.computing_intensity,
                    fa.computing_intensity,
                    select::classify(&model, &fb).as_str(),
                    select::classify(&model, &fa).as_str()
                )
            }),
        )?;
        report.output("windows", path);
    }
    report
        .count("num_vertices", g.num_vertices())
        .count("nnz", g.num_entries())
        .count("windows_total", before.len())
        .count("groups", grouping.groups().len())
        .metric("mean_ci_before", mean_ci(&before))
        .metric("mean_ci_after", mean_ci(&after))
        .count("windows_tile_before", tile_before)
        .count("windows_tile_after", tile_after);
    Ok(report)
}

// ---------------------------------------------------------------- gnn-bench

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchMode {
    Fused,
    Unfused,
    Both,
}

#[derive(Debug, Args)]
pub struct GnnArgs {
    #[command(flatten)]
    selector: SelectorArgs,
    #[arg(long, alias = "matrix")]
    graph: String,
    /// symmetric, row_normalized, raw or self_loops.
    #[arg(long, default_value = "symmetric")]
    norm: String,
    #[arg(long, alias = "d-in", default_value_t = 32)]
    din: usize,
    #[arg(long, alias = "d-out", default_value_t = 16)]
    dout: usize,
    #[arg(long, value_enum, default_value_t = BenchMode::Both)]
    mode: BenchMode,
    /// Aggregation path per window: hybrid uses the selector.
    #[arg(long, value_enum, default_value_t = Mode::Hybrid)]
    path: Mode,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// Full benchmark JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn gnn_bench(ctx: &Ctx, a: &GnnArgs) -> Result<RunReport> {
    let mut report = RunReport::new("gnn-bench");
    let norm: Normalization = a.norm.parse().map_err(|e| InputError(format!("{e}")))?;
    report
        .input("graph", &a.graph)
        .input("norm", norm.as_str())
        .input("din", a.din)
        .input("dout", a.dout)
        .input("mode", format!("{:?}", a.mode).to_lowercase())
        .input("path", format!("{:?}", a.path).to_lowercase())
        .input("repeats", a.repeats);
    let model = match a.path {
        Mode::Hybrid => Some(load_model(ctx, &a.selector, &mut report)?),
        _ => None,
    };
    let g = load_graph(&a.graph, false, ctx.seed)?;
    let a_norm = gnn::normalize_adj_with(&g, norm);
    let modes: &[FusionMode] = match a.mode {
        BenchMode::Fused => &[FusionMode::Fused],
        BenchMode::Unfused => &[FusionMode::Unfused],
        BenchMode::Both => &[FusionMode::Unfused, FusionMode::Fused],
    };
    let bench = match ctx.precision {
        Precision::F64 => bench_layer(ctx, a, &a_norm, model.as_ref(), modes)?,
        Precision::F32 => bench_layer(ctx, a, &a_norm.cast::<f32>(), model.as_ref(), modes)?,
    };
    if let Some(out) = &a.out {
        let json = serde_json::to_string_pretty(&bench)?;
        std::fs::write(out, json + "\n").with_context(|| format!("cannot write {}", out.display()))?;
        report.output("bench", out);
    }
    report
        .count("num_vertices", bench.num_vertices)
        .count("nnz", a_norm.nnz())
        .metric("max_rel_diff", bench.max_rel_diff);
    for m in &bench.modes {
        let k = m.mode.as_str();
        let f = &m.forward_traffic;
        let b = &m.backward_traffic;
        report
            .metric(&format!("{k}_forward_intermediate_writes"), f.intermediate_writes as f64)
            .metric(&format!("{k}_forward_intermediate_reads"), f.intermediate_reads as f64)
            .metric(&format!("{k}_forward_pass_launches"), f.pass_launches)
            .metric(&format!("{k}_forward_cache_writes"), f.cache_writes as f64)
            .metric(&format!("{k}_backward_intermediate_writes"), b.intermediate_writes as f64)
            .metric(&format!("{k}_backward_intermediate_reads"), b.intermediate_reads as f64)
            .metric(&format!("{k}_backward_pass_launches"), b.pass_launches)
            .timing(&format!("{k}_forward_seconds"), m.forward_seconds)
            .timing(&format!("{k}_backward_seconds"), m.backward_seconds);
    }
    Ok(report)
}

fn bench_layer<T: Scalar>(
    ctx: &Ctx,
    a: &GnnArgs,
    a_norm: &SparseCsr<T>,
    model: Option<&SelectorModel>,
    modes: &[FusionMode],
) -> Result<gnn::LayerBench> {
    let plan = match (a.path, model) {
        (Mode::Hybrid, Some(m)) => GnnPlan::new(a_norm, |w| select::assign(m, w.windows()))?,
        (Mode::Tile, _) => GnnPlan::uniform(a_norm, ExecPath::Tile)?,
        _ => GnnPlan::uniform(a_norm, ExecPath::Scalar)?,
    };
    let layer = GnnLayer::<T>::random(a.din, a.dout, ctx.seed);
    let x = DenseMatrix::<f64>::random(a_norm.num_rows(), a.din, ctx.seed.wrapping_add(1)).cast::<T>();
    Ok(gnn::layer_bench(&layer, &plan, &x, modes, a.repeats)?)
}

// ---------------------------------------------------------------- pipeline

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    selector: SelectorArgs,
    #[arg(long, alias = "matrix")]
    graph: String,
    /// Reorder with LOA before classification.
    #[arg(long)]
    loa: bool,
    #[arg(long, default_value_t = loa::DEFAULT_VW)]
    vw: usize,
    /// Relabel the graph with this seed first.
    #[arg(long)]
    scramble: Option<u64>,
    /// Columns of the random dense operand.
    #[arg(long, default_value_t = 32)]
    dim: usize,
}

pub fn pipeline(ctx: &Ctx, a: &PipelineArgs) -> Result<RunReport> {
    let mut report = RunReport::new("pipeline");
    report
        .input("graph", &a.graph)
        .input("loa", a.loa)
        .input("vw", a.vw)
        .input("dim", a.dim);
    let model = load_model(ctx, &a.selector, &mut report).context("stage select")?;
    let g = load_graph(&a.graph, false, ctx.seed).context("stage load")?;
    let g = scrambled(g, a.scramble, &mut report).context("stage scramble")?;
    let n = g.num_vertices();

    let before = partition(g.adjacency(), WINDOW_HEIGHT).context("stage partition")?;
    let tile_before = select::assign(&model, &before).count(ExecPath::Tile);
    let ci_before = mean_ci(&before);
    // X rows follow the loaded vertex order; reordering moves them with the graph
    let x = DenseMatrix::<f64>::random(n, a.dim, ctx.seed);
    let (g, x, ci_after, tile_after) = if a.loa {
        if a.vw == 0 {
            bail!(InputError("--vw must be at least 1".into()));
        }
        let g = undirected(g, &a.graph).context("stage loa")?;
        let t0 = Instant::now();
        let grouping = loa::build_windows_optimized(&g, a.vw).context("stage loa")?;
        let (h, perm) = loa::reorder(&g, &grouping).context("stage loa")?;
        report.timing("loa_seconds", t0.elapsed().as_secs_f64());
        let after = partition(h.adjacency(), WINDOW_HEIGHT).context("stage partition")?;
        let src = perm.inverse();
        let x = x.gather_rows(src.as_slice());
        (h, x, mean_ci(&after), select::assign(&model, &after).count(ExecPath::Tile))
    } else {
        (g, x, ci_before, tile_before)
    };

    let m = WindowedMatrix::new(g.adjacency(), WINDOW_HEIGHT).context("stage partition")?;
    let assignment = select::assign(&model, m.windows());
    let t1 = Instant::now();
    let (sum, stats) = match ctx.precision {
        Precision::F64 => {
            let r = spmm_hybrid(&m, &assignment, &x).context("stage spmm")?;
            (checksum(&r.z), r.stats)
        }
        Precision::F32 => {
            let m32 = WindowedMatrix::new(&g.adjacency().cast::<f32>(), WINDOW_HEIGHT).context("stage partition")?;
            let r = spmm_hybrid(&m32, &assignment, &x.cast::<f32>()).context("stage spmm")?;
            (checksum(&r.z), r.stats)
        }
    };
    report.timing("spmm_seconds", t1.elapsed().as_secs_f64());
    if stats.entries_scalar + stats.entries_tile != g.num_entries() {
        bail!(InvariantViolation("hybrid product did not cover every entry".into()));
    }

    report
        .count("num_vertices", n)
        .count("nnz", g.num_entries())
        .count("windows_total", m.windows().len())
        .count("windows_tile_before_loa", tile_before)
        .metric("mean_ci_before_loa", ci_before)
        .count("windows_tile_after_loa", tile_after)
        .metric("mean_ci_after_loa", ci_after)
        .count("windows_tile", stats.windows_tile)
        .count("windows_scalar", stats.windows_scalar)
        .count("windows_empty", stats.windows_empty)
        .count("tiles", stats.tiles)
        .metric("spmm_checksum", sum);
    Ok(report)
}
