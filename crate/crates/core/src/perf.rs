//! Analytic per-window cost model for the two execution paths.
//!
//! The scalar path pays a fixed per-window cost plus a cost per stored entry
//! per dense column. The tile path pays a fixed cost, a compute cost per
//! `16x8x16` block multiply and a memory cost per condensed column of `X`
//! loaded per 16-column block of the output:
//!
//! ```text
//! t_scalar = alpha_scalar + beta_scalar * nnz * dim
//! t_tile   = alpha_tile + ceil(ncols/8) * ceil(dim/16) * beta_tile
//!                       + ncols * ceil(dim/16) * gamma_tile
//! ```
//!
//! So the tile estimate does not depend on density, and the scalar estimate
//! does not depend on how many columns the entries spread over.

use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{run_window, ExecPath, TileScratch, DIM_TILE};
use crate::matrix::DenseMatrix;
use crate::window::{RowWindow, WindowFeatures, TILE_COLS};

/// Version tag of the params JSON layout.
pub const PARAMS_FORMAT_VERSION: &str = "1";

const DEFAULT_PARAMS_JSON: &str = include_str!("../config/default_params.json");

/// Cost coefficients, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub alpha_scalar: f64,
    pub beta_scalar: f64,
    pub alpha_tile: f64,
    pub beta_tile: f64,
    pub gamma_tile: f64,
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.alpha_scalar,
            self.beta_scalar,
            self.alpha_tile,
            self.beta_tile,
            self.gamma_tile,
        ];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cost parameters must be finite and non-negative: {self:?}"
            )));
        }
        Ok(())
    }

    /// Findings that do not make the parameters unusable: a tile path with
    /// no per-column load cost, or one that is not memory-bound at
    /// ncols=32, dim=32.
    pub fn sanity_warnings(&self) -> Vec<String> {
        let mut warnings = Vec::new();
        if self.gamma_tile <= 0.0 {
            warnings.push("gamma_tile is not positive; tile path shows no per-column load cost".into());
        }
        if !self.tile_memory_dominates(32, 32) {
            warnings.push(
                "tile path is not memory-dominated at ncols=32, dim=32 (gamma_tile*ncols <= beta_tile*ceil(ncols/8))"
                    .into(),
            );
        }
        warnings
    }

    /// The shipped defaults (see `config/default_params.json`).
    pub fn defaults() -> Self {
        ParamsFile::from_json(DEFAULT_PARAMS_JSON)
            .expect("embedded default params parse")
            .params
    }

    /// Whether loading `X` outweighs the block multiplies on the tile path
    /// for a window with `ncols` condensed columns.
    pub fn tile_memory_dominates(&self, ncols: usize, dim: usize) -> bool {
        let dblocks = dim.div_ceil(DIM_TILE) as f64;
        self.gamma_tile * ncols as f64 * dblocks > self.beta_tile * ncols.div_ceil(TILE_COLS) as f64 * dblocks
    }
}

impl Default for CostParams {
    fn default() -> Self {
        Self::defaults()
    }
}

pub fn estimate_scalar(f: &WindowFeatures, dim: usize, p: &CostParams) -> f64 {
    p.alpha_scalar + p.beta_scalar * f.nnz as f64 * dim as f64
}

pub fn estimate_tile(f: &WindowFeatures, dim: usize, p: &CostParams) -> f64 {
    let dblocks = dim.div_ceil(DIM_TILE) as f64;
    let blocks = f.ncols.div_ceil(TILE_COLS) as f64;
    p.alpha_tile + blocks * dblocks * p.beta_tile + f.ncols as f64 * dblocks * p.gamma_tile
}

/// Params file: the five coefficients plus where they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub version: String,
    #[serde(flatten)]
    pub params: CostParams,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub provider: String,
    pub date: String,
    pub sample_count: usize,
}

impl ParamsFile {
    pub fn from_json(s: &str) -> Result<Self> {
        let file: ParamsFile =
            serde_json::from_str(s).map_err(|e| Error::InvalidArgument(format!("params file: {e}")))?;
        file.params.validate()?;
        Ok(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let s = serde_json::to_string_pretty(self).expect("params serialize");
        std::fs::write(path, s + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn defaults() -> Self {
        Self::from_json(DEFAULT_PARAMS_JSON).expect("embedded default params parse")
    }
}

/// One timing observation. Either path may be missing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSample {
    pub features: WindowFeatures,
    pub dim: usize,
    pub t_scalar: Option<f64>,
    pub t_tile: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub params: CostParams,
    pub r2_scalar: f64,
    pub r2_tile: f64,
    pub samples_scalar: usize,
    pub samples_tile: usize,
    /// Non-fatal findings, e.g. timings where the tile path is not
    /// memory-bound.
    pub warnings: Vec<String>,
}

fn scalar_design(f: &WindowFeatures, dim: usize) -> [f64; 2] {
    [1.0, f.nnz as f64 * dim as f64]
}

fn tile_design(f: &WindowFeatures, dim: usize) -> [f64; 3] {
    let dblocks = dim.div_ceil(DIM_TILE) as f64;
    [
        1.0,
        f.ncols.div_ceil(TILE_COLS) as f64 * dblocks,
        f.ncols as f64 * dblocks,
    ]
}

fn least_squares<const K: usize>(rows: &[[f64; K]], y: &[f64], what: &str) -> Result<[f64; K]> {
    let mut distinct: Vec<[f64; K]> = rows.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::RankDeficient(format!(
            "{what} path needs at least 3 distinct samples, got {}",
            distinct.len()
        )));
    }
    // scale columns so the singular-value cutoff is meaningful
    let mut scale = [0.0f64; K];
    for r in rows {
        for k in 0..K {
            scale[k] = scale[k].max(r[k].abs());
        }
    }
    if scale.contains(&0.0) {
        return Err(Error::RankDeficient(format!("{what} design has an all-zero column")));
    }
    let a = DMatrix::from_fn(rows.len(), K, |i, k| rows[i][k] / scale[k]);
    let b = DVector::from_column_slice(y);
    let full = solve_subset(&a, &b, &[true; K]).ok_or_else(|| {
        Error::RankDeficient(format!("{what} design is rank-deficient"))
    })?;

    // Nonnegative least squares by enumerating the free-coefficient subsets;
    // K is at most 3, so this is exact and cheap.
    let mut best: Option<(f64, DVector<f64>)> = None;
    if full.iter().all(|&v| v >= 0.0) {
        best = Some(((&a * &full - &b).norm_squared(), full));
    } else {
        for mask in 1..(1u32 << K) {
            let free: [bool; K] = std::array::from_fn(|k| mask & (1 << k) != 0);
            let Some(sol) = solve_subset(&a, &b, &free) else { continue };
            if sol.iter().any(|&v| v < 0.0) {
                continue;
            }
            let res = (&a * &sol - &b).norm_squared();
            if best.as_ref().is_none_or(|(r, _)| res < *r) {
                best = Some((res, sol));
            }
        }
    }
    let sol = best.map(|(_, s)| s).unwrap_or_else(|| DVector::zeros(K));
    let mut out = [0.0; K];
    for k in 0..K {
        out[k] = sol[k] / scale[k];
    }
    Ok(out)
}

/// Least squares over the columns flagged in `free`, zero elsewhere. `None`
/// when the selected columns are rank-deficient.
fn solve_subset<const K: usize>(a: &DMatrix<f64>, b: &DVector<f64>, free: &[bool; K]) -> Option<DVector<f64>> {
    let cols: Vec<usize> = (0..K).filter(|&k| free[k]).collect();
    let sub = a.select_columns(cols.iter());
    let svd = sub.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > smax * 1e-10) {
        return None;
    }
    let x = svd.solve(b, 0.0).ok()?;
    let mut out = DVector::zeros(K);
    for (i, &k) in cols.iter().enumerate() {
        out[k] = x[i];
    }
    Some(out)
}

fn r_squared(pred: impl Iterator<Item = f64>, y: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = pred.zip(y).map(|(p, v)| (v - p).powi(2)).sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}

/// Coefficient of determination of `params` on the given samples, per path.
pub fn goodness_of_fit(params: &CostParams, samples: &[CalibrationSample]) -> (f64, f64) {
    let (mut ps, mut ys, mut pt, mut yt) = (vec![], vec![], vec![], vec![]);
    for s in samples {
        if let Some(t) = s.t_scalar {
            ps.push(estimate_scalar(&s.features, s.dim, params));
            ys.push(t);
        }
        if let Some(t) = s.t_tile {
            pt.push(estimate_tile(&s.features, s.dim, params));
            yt.push(t);
        }
    }
    (r_squared(ps.into_iter(), &ys), r_squared(pt.into_iter(), &yt))
}

/// Least-squares fit of both paths with every coefficient held at or above 0.
pub fn calibrate(samples: &[CalibrationSample]) -> Result<Calibration> {
    let (mut xs, mut ys, mut xt, mut yt) = (vec![], vec![], vec![], vec![]);
    for s in samples {
        if let Some(t) = s.t_scalar {
            xs.push(scalar_design(&s.features, s.dim));
            ys.push(t);
        }
        if let Some(t) = s.t_tile {
            xt.push(tile_design(&s.features, s.dim));
            yt.push(t);
        }
    }
    let [a_s, b_s] = least_squares(&xs, &ys, "scalar")?;
    let [a_t, b_t, g_t] = least_squares(&xt, &yt, "tile")?;
    let params = CostParams {
        alpha_scalar: a_s.max(0.0),
        beta_scalar: b_s.max(0.0),
        alpha_tile: a_t.max(0.0),
        beta_tile: b_t.max(0.0),
        gamma_tile: g_t.max(0.0),
    };
    let warnings = params.sanity_warnings();
    let (r2_scalar, r2_tile) = goodness_of_fit(&params, samples);
    Ok(Calibration {
        params,
        r2_scalar,
        r2_tile,
        samples_scalar: xs.len(),
        samples_tile: xt.len(),
        warnings,
    })
}

/// Timed batches per path and window in [`measure_windows`].
pub const MEASURE_BATCHES: usize = 20;

/// Wall-clock seconds per run of each reference executor on one window.
/// Same as [`measure_windows`] on a single window.
pub fn measured_cpu_provider(window: &RowWindow<f64>, dim: usize, repeats: usize, seed: u64) -> (f64, f64) {
    measure_windows(std::slice::from_ref(window), dim, repeats, seed)[0]
}

/// Wall-clock seconds per run of each reference executor, per window.
///
/// Every window gets one untimed warm-up run per path. The `repeats` runs
/// are then split into [`MEASURE_BATCHES`] batches, taken in round-robin
/// passes over all windows so each window's batches are spread across the
/// whole measurement, and the lowest batch mean is kept. On shared hosts
/// the machine alternates between fast and slow stretches lasting tens of
/// milliseconds; spreading the batches lets every window see a fast one.
/// `X` is seeded random with enough rows for every window.
pub fn measure_windows(windows: &[RowWindow<f64>], dim: usize, repeats: usize, seed: u64) -> Vec<(f64, f64)> {
    let repeats = repeats.max(1);
    let per_batch = repeats.div_ceil(MEASURE_BATCHES);
    let x_rows = windows
        .iter()
        .filter_map(|w| w.nonzero_cols().last())
        .max()
        .map_or(1, |&c| c + 1);
    let x = DenseMatrix::<f64>::random(x_rows, dim, seed);
    let max_rows = windows.iter().map(|w| w.row_count()).max().unwrap_or(0);
    let mut out = vec![0.0; max_rows * dim];
    let mut scratch = TileScratch::new(dim);
    let mut best = vec![(f64::INFINITY, f64::INFINITY); windows.len()];

    let mut batch = |w: &RowWindow<f64>, path: ExecPath, runs: usize| -> f64 {
        let out = &mut out[..w.row_count() * dim];
        let start = Instant::now();
        for _ in 0..runs {
            out.fill(0.0);
            run_window(w, path, &x, out, &mut scratch);
            std::hint::black_box(&mut *out);
        }
        start.elapsed().as_secs_f64() / runs.max(1) as f64
    };
    for w in windows {
        batch(w, ExecPath::Scalar, 1);
        batch(w, ExecPath::Tile, 1);
    }
    for _ in 0..MEASURE_BATCHES {
        for (w, b) in windows.iter().zip(best.iter_mut()) {
            b.0 = b.0.min(batch(w, ExecPath::Scalar, per_batch));
            b.1 = b.1.min(batch(w, ExecPath::Tile, per_batch));
        }
    }
    best.into_iter().map(|(s, t)| (s.max(1e-12), t.max(1e-12))).collect()
}

/// Device timings read from a `ncols,density,t_scalar,t_tile` CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTimings {
    rows: Vec<TimingRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub ncols: usize,
    pub density: f64,
    pub t_scalar: f64,
    pub t_tile: f64,
}

impl CsvTimings {
    pub fn new(rows: Vec<TimingRow>) -> Self {
        Self { rows }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Provider(format!("{}: {e}", path.display())))?;
        let headers = rdr
            .headers()
            .map_err(|e| Error::Provider(format!("{}: {e}", path.display())))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["ncols", "density", "t_scalar", "t_tile"] {
            return Err(Error::Provider(format!(
                "{}: header must be 'ncols,density,t_scalar,t_tile'",
                path.display()
            )));
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.deserialize::<TimingRow>().enumerate() {
            let row = rec.map_err(|e| Error::parse(i + 2, e.to_string()))?;
            rows.push(row);
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[TimingRow] {
        &self.rows
    }

    /// Timings for the row matching `ncols` exactly and `density` within 1e-9.
    pub fn lookup(&self, ncols: usize, density: f64) -> Result<(f64, f64)> {
        self.rows
            .iter()
            .find(|r| r.ncols == ncols && (r.density - density).abs() <= 1e-9)
            .map(|r| (r.t_scalar, r.t_tile))
            .ok_or_else(|| Error::Provider(format!("no timing row for ncols={ncols}, density={density}")))
    }
}

/// Source of `(t_scalar, t_tile)` for a window.
#[derive(Debug, Clone, PartialEq)]
pub enum TimingProvider {
    Analytic(CostParams),
    MeasuredCpu { repeats: usize, seed: u64 },
    ExternalCsv(CsvTimings),
}

impl TimingProvider {
    pub fn time(&self, window: &RowWindow<f64>, dim: usize) -> Result<(f64, f64)> {
        match self {
            TimingProvider::Analytic(p) => {
                let f = window.features();
                Ok((estimate_scalar(&f, dim, p), estimate_tile(&f, dim, p)))
            }
            TimingProvider::MeasuredCpu { repeats, seed } => {
                Ok(measured_cpu_provider(window, dim, *repeats, *seed))
            }
            TimingProvider::ExternalCsv(t) => {
                let f = window.features();
                t.lookup(f.ncols, f.density)
            }
        }
    }

    /// Times for many windows at once. Wall-clock providers measure them in
    /// interleaved passes (see [`measure_windows`]).
    pub fn time_many(&self, windows: &[RowWindow<f64>], dim: usize) -> Result<Vec<(f64, f64)>> {
        match self {
            TimingProvider::MeasuredCpu { repeats, seed } => Ok(measure_windows(windows, dim, *repeats, *seed)),
            _ => windows.iter().map(|w| self.time(w, dim)).collect(),
        }
    }

    /// Wall-clock providers must run serially.
    pub fn is_measured(&self) -> bool {
        matches!(self, TimingProvider::MeasuredCpu { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            TimingProvider::Analytic(_) => "cost-model",
            TimingProvider::MeasuredCpu { .. } => "measured",
            TimingProvider::ExternalCsv(_) => "csv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub nnz: usize,
    pub density: f64,
    pub sparsity: f64,
    pub t_scalar: f64,
    pub t_tile: f64,
}

/// Estimates for a 16-row window with `ncols` columns as nnz runs from
/// `ncols` to `15 * ncols` (density 1/16 to 15/16).
pub fn density_sweep(p: &CostParams, ncols: usize, dim: usize) -> Vec<SweepPoint> {
    (ncols..=15 * ncols)
        .map(|nnz| {
            let f = WindowFeatures::from_counts(nnz, ncols, 16);
            SweepPoint {
                nnz,
                density: f.density,
                sparsity: f.sparsity(),
                t_scalar: estimate_scalar(&f, dim, p),
                t_tile: estimate_tile(&f, dim, p),
            }
        })
        .collect()
}

/// Smallest swept density at which the scalar estimate reaches the tile
/// estimate, if the scalar path is faster below it.
pub fn density_crossover(p: &CostParams, ncols: usize, dim: usize) -> Option<f64> {
    let sweep = density_sweep(p, ncols, dim);
    let first = sweep.first()?;
    if first.t_scalar >= first.t_tile {
        return None;
    }
    sweep.iter().find(|s| s.t_scalar >= s.t_tile).map(|s| s.density)
}

pub fn write_sweep_csv(points: &[SweepPoint], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Provider(e.to_string()))?;
    for p in points {
        w.serialize(p).map_err(|e| Error::Provider(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
