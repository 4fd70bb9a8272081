//! Per-window path selection with a two-feature logistic regression.
//!
//! Training follows four steps: generate synthetic 16-row windows over a
//! grid of (non-zero columns, nnz), time both paths on each with a
//! [`TimingProvider`], fit the classifier, and encode its coefficients as a
//! small JSON model. Samples are labeled 1 when the scalar path is strictly
//! faster.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{Assignment, ExecPath};
use crate::matrix::SparseCsr;
use crate::perf::TimingProvider;
use crate::window::{partition, RowWindow, WindowFeatures, WINDOW_HEIGHT};

pub const MAX_SYNTHETIC_COLS: usize = 130;
pub const DEFAULT_DIM: usize = 32;

/// A 16-row window over columns `0..ncols` with `nnz` unit entries. Every
/// column first receives one entry in a uniformly drawn row; the remaining
/// entries go to uniformly drawn free positions.
pub fn generate_synthetic(ncols: usize, nnz: usize, seed: u64) -> Result<RowWindow<f64>> {
    if !(1..=MAX_SYNTHETIC_COLS).contains(&ncols) {
        return Err(Error::InvalidArgument(format!(
            "ncols must be in 1..={MAX_SYNTHETIC_COLS}, got {ncols}"
        )));
    }
    if nnz > WINDOW_HEIGHT * ncols {
        return Err(Error::InvalidArgument(format!(
            "nnz {nnz} does not fit in a {WINDOW_HEIGHT}x{ncols} window"
        )));
    }
    if nnz < ncols || nnz > 15 * ncols {
        return Err(Error::InvalidArgument(format!(
            "nnz must be in {ncols}..={} for ncols={ncols}, got {nnz}",
            15 * ncols
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut occupied = vec![false; WINDOW_HEIGHT * ncols];
    for c in 0..ncols {
        let r = rng.gen_range(0..WINDOW_HEIGHT);
        occupied[r * ncols + c] = true;
    }
    let mut free: Vec<usize> = (0..occupied.len()).filter(|&p| !occupied[p]).collect();
    for k in 0..nnz - ncols {
        let pick = rng.gen_range(k..free.len());
        free.swap(k, pick);
        occupied[free[k]] = true;
    }
    let triplets: Vec<(usize, usize, f64)> = occupied
        .iter()
        .enumerate()
        .filter(|(_, &o)| o)
        .map(|(p, _)| (p / ncols, p % ncols, 1.0))
        .collect();
    let csr = SparseCsr::from_triplets(WINDOW_HEIGHT, ncols, &triplets)?;
    Ok(partition(&csr, WINDOW_HEIGHT)?.remove(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridPoint {
    pub ncols: usize,
    pub nnz: usize,
    pub seed: u64,
}

/// Size of [`default_grid`].
pub const DEFAULT_GRID_POINTS: usize = 6000;

/// [`random_grid`] with [`DEFAULT_GRID_POINTS`] points. Continuous densities
/// pin the decision boundary down even where it falls between 1/16 and 3/16,
/// which the coarse grid cannot resolve.
pub fn default_grid(base_seed: u64) -> Vec<GridPoint> {
    random_grid(DEFAULT_GRID_POINTS, base_seed)
}

/// ncols in {1, 2, 4, 8, 16, ..., 128, 130}, eight evenly spaced densities
/// from 1/16 to 15/16 and three seeds per point.
pub fn coarse_grid(base_seed: u64) -> Vec<GridPoint> {
    let mut ncols: Vec<usize> = vec![1, 2, 4];
    ncols.extend((8..=128).step_by(8));
    ncols.push(130);
    let mut grid = Vec::new();
    for &n in &ncols {
        for k in 0..8 {
            // density (1 + 2k) / 16
            let nnz = (1 + 2 * k) * n;
            for _ in 0..3 {
                grid.push(GridPoint { ncols: n, nnz, seed: 0 });
            }
        }
    }
    assign_seeds(grid, base_seed)
}

/// Every ncols in 1..=130, nnz = k * ncols for k in 1..=15, three seeds.
pub fn full_grid(base_seed: u64) -> Vec<GridPoint> {
    let mut grid = Vec::new();
    for n in 1..=MAX_SYNTHETIC_COLS {
        for k in 1..=15 {
            for _ in 0..3 {
                grid.push(GridPoint { ncols: n, nnz: k * n, seed: 0 });
            }
        }
    }
    assign_seeds(grid, base_seed)
}

/// `count` points with ncols uniform in 1..=130 and nnz uniform in
/// `ncols..=15*ncols`.
pub fn random_grid(count: usize, base_seed: u64) -> Vec<GridPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    let grid = (0..count)
        .map(|_| {
            let ncols = rng.gen_range(1..=MAX_SYNTHETIC_COLS);
            let nnz = rng.gen_range(ncols..=15 * ncols);
            GridPoint { ncols, nnz, seed: 0 }
        })
        .collect();
    assign_seeds(grid, base_seed)
}

fn assign_seeds(mut grid: Vec<GridPoint>, base_seed: u64) -> Vec<GridPoint> {
    for (i, p) in grid.iter_mut().enumerate() {
        p.seed = base_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64);
    }
    grid
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub ncols: usize,
    pub density: f64,
    pub t_scalar: f64,
    pub t_tile: f64,
    /// 1 when the scalar path is strictly faster.
    pub label: u8,
}

impl TrainingSample {
    pub fn new(ncols: usize, density: f64, t_scalar: f64, t_tile: f64) -> Self {
        Self {
            ncols,
            density,
            t_scalar,
            t_tile,
            label: u8::from(t_scalar < t_tile),
        }
    }

    pub fn features(&self) -> [f64; 2] {
        [self.ncols as f64, self.density]
    }
}

/// One sample per grid point, times averaged over `repeats` provider calls.
/// Wall-clock providers run serially over all windows at once; the others
/// in parallel.
pub fn collect_samples(
    grid: &[GridPoint],
    provider: &TimingProvider,
    repeats: usize,
    dim: usize,
) -> Result<Vec<TrainingSample>> {
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be at least 1".into()));
    }
    let windows = grid
        .par_iter()
        .map(|p| generate_synthetic(p.ncols, p.nnz, p.seed))
        .collect::<Result<Vec<_>>>()?;
    let mut totals = vec![(0.0, 0.0); windows.len()];
    for _ in 0..repeats {
        let times = if provider.is_measured() {
            provider.time_many(&windows, dim)?
        } else {
            windows.par_iter().map(|w| provider.time(w, dim)).collect::<Result<Vec<_>>>()?
        };
        for (acc, (s, t)) in totals.iter_mut().zip(times) {
            acc.0 += s;
            acc.1 += t;
        }
    }
    Ok(windows
        .iter()
        .zip(totals)
        .map(|(w, (ts, tt))| {
            let f = w.features();
            TrainingSample::new(f.ncols, f.density, ts / repeats as f64, tt / repeats as f64)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Newton steps with step halving; ignores the learning rate.
    #[default]
    Newton,
    GradientDescent,
}

impl Optimizer {
    pub fn as_str(self) -> &'static str {
        match self {
            Optimizer::Newton => "newton",
            Optimizer::GradientDescent => "gradient_descent",
        }
    }
}

impl std::str::FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "newton" => Ok(Optimizer::Newton),
            "gd" | "gradient_descent" => Ok(Optimizer::GradientDescent),
            other => Err(Error::InvalidArgument(format!("unknown optimizer {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    /// Gradient descent step size.
    pub learning_rate: f64,
    /// Iteration cap for either optimizer.
    pub max_epochs: usize,
    /// Stop once the loss changes by less than this between epochs.
    pub tolerance: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::Newton,
            learning_rate: 0.1,
            max_epochs: 50_000,
            tolerance: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn gradient_descent(learning_rate: f64, max_epochs: usize) -> Self {
        Self {
            optimizer: Optimizer::GradientDescent,
            learning_rate,
            max_epochs,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSummary {
    pub epochs: usize,
    pub final_loss: f64,
    pub converged: bool,
}

/// Linear score `w_ncols * z(ncols) + w_density * z(density) + bias` over
/// z-scored features. Positive scores select the scalar path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectorModel {
    pub w_ncols: f64,
    pub w_density: f64,
    pub bias: f64,
    pub feature_means: [f64; 2],
    pub feature_scales: [f64; 2],
}

impl SelectorModel {
    /// A model on raw features (`means = 0`, `scales = 1`).
    pub fn raw(w_ncols: f64, w_density: f64, bias: f64) -> Self {
        Self {
            w_ncols,
            w_density,
            bias,
            feature_means: [0.0, 0.0],
            feature_scales: [1.0, 1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.w_ncols, self.w_density, self.bias]
            .iter()
            .chain(&self.feature_means)
            .chain(&self.feature_scales)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Model("non-finite coefficient".into()));
        }
        if self.feature_scales.iter().any(|&s| s <= 0.0) {
            return Err(Error::Model("feature scales must be positive".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn score(&self, ncols: f64, density: f64) -> f64 {
        self.w_ncols * (ncols - self.feature_means[0]) / self.feature_scales[0]
            + self.w_density * (density - self.feature_means[1]) / self.feature_scales[1]
            + self.bias
    }

    /// Coefficients `(w1, w2, b)` of the same score on raw features.
    pub fn raw_coefficients(&self) -> (f64, f64, f64) {
        let w1 = self.w_ncols / self.feature_scales[0];
        let w2 = self.w_density / self.feature_scales[1];
        let b = self.bias - w1 * self.feature_means[0] - w2 * self.feature_means[1];
        (w1, w2, b)
    }

    pub fn predict(&self, ncols: f64, density: f64) -> ExecPath {
        if self.score(ncols, density) > 0.0 {
            ExecPath::Scalar
        } else {
            ExecPath::Tile
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }

    /// JSON with every number written as a 17-significant-digit string.
    pub fn to_json(&self) -> String {
        let f = |v: f64| format!("{v:.16e}");
        let file = ModelFile {
            w_ncols: Num::Text(f(self.w_ncols)),
            w_density: Num::Text(f(self.w_density)),
            bias: Num::Text(f(self.bias)),
            feature_means: [Num::Text(f(self.feature_means[0])), Num::Text(f(self.feature_means[1]))],
            feature_scales: [Num::Text(f(self.feature_scales[0])), Num::Text(f(self.feature_scales[1]))],
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(s).map_err(|e| Error::Model(e.to_string()))?;
        let model = Self {
            w_ncols: file.w_ncols.value("w_ncols")?,
            w_density: file.w_density.value("w_density")?,
            bias: file.bias.value("bias")?,
            feature_means: [
                file.feature_means[0].value("feature_means")?,
                file.feature_means[1].value("feature_means")?,
            ],
            feature_scales: [
                file.feature_scales[0].value("feature_scales")?,
                file.feature_scales[1].value("feature_scales")?,
            ],
        };
        model.validate()?;
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    w_ncols: Num,
    w_density: Num,
    bias: Num,
    feature_means: [Num; 2],
    feature_scales: [Num; 2],
}

/// Numbers are written as strings; plain JSON numbers are accepted on load.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Num {
    Text(String),
    Number(f64),
}

impl Num {
    fn value(&self, field: &str) -> Result<f64> {
        match self {
            Num::Number(v) => Ok(*v),
            Num::Text(s) => s
                .trim()
                .parse()
                .map_err(|_| Error::Model(format!("field {field}: '{s}' is not a number"))),
        }
    }
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(s))` without overflow.
fn softplus(s: f64) -> f64 {
    if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 0.0 && std.is_finite() { std } else { 1.0 })
}

type Standardized = [([f64; 2], f64)];

/// Mean cross-entropy and its gradient and Hessian in `(w0, w1, b)`.
fn loss_terms(z: &Standardized, w: &[f64; 3], with_hessian: bool) -> (f64, [f64; 3], [[f64; 3]; 3]) {
    let n = z.len() as f64;
    let mut loss = 0.0;
    let mut g = [0.0f64; 3];
    let mut h = [[0.0f64; 3]; 3];
    for (x, y) in z {
        let s = w[0] * x[0] + w[1] * x[1] + w[2];
        // y=1: log(1+e^-s), y=0: log(1+e^s)
        loss += if *y > 0.5 { softplus(-s) } else { softplus(s) };
        let p = sigmoid(s);
        let f = [x[0], x[1], 1.0];
        for i in 0..3 {
            g[i] += (p - y) * f[i];
        }
        if with_hessian {
            let q = p * (1.0 - p);
            for i in 0..3 {
                for j in 0..3 {
                    h[i][j] += q * f[i] * f[j];
                }
            }
        }
    }
    for (gi, hi) in g.iter_mut().zip(h.iter_mut()) {
        *gi /= n;
        for v in hi.iter_mut() {
            *v /= n;
        }
    }
    (loss / n, g, h)
}

fn loss_only(z: &Standardized, w: &[f64; 3]) -> f64 {
    z.iter()
        .map(|(x, y)| {
            let s = w[0] * x[0] + w[1] * x[1] + w[2];
            if *y > 0.5 {
                softplus(-s)
            } else {
                softplus(s)
            }
        })
        .sum::<f64>()
        / z.len() as f64
}

fn gradient_descent(z: &Standardized, cfg: &TrainConfig) -> ([f64; 2], f64, TrainSummary) {
    let mut w = [0.0f64; 3];
    let (mut loss, mut g, _) = loss_terms(z, &w, false);
    let mut summary = TrainSummary {
        epochs: 0,
        final_loss: loss,
        converged: false,
    };
    for epoch in 1..=cfg.max_epochs {
        for i in 0..3 {
            w[i] -= cfg.learning_rate * g[i];
        }
        let (next, ng, _) = loss_terms(z, &w, false);
        let delta = (loss - next).abs();
        loss = next;
        g = ng;
        summary.epochs = epoch;
        summary.final_loss = loss;
        if delta < cfg.tolerance {
            summary.converged = true;
            break;
        }
    }
    ([w[0], w[1]], w[2], summary)
}

fn newton(z: &Standardized, cfg: &TrainConfig) -> ([f64; 2], f64, TrainSummary) {
    let mut w = [0.0f64; 3];
    let mut loss = loss_only(z, &w);
    let mut summary = TrainSummary {
        epochs: 0,
        final_loss: loss,
        converged: false,
    };
    for epoch in 1..=cfg.max_epochs {
        let (_, g, h) = loss_terms(z, &w, true);
        let hm = nalgebra::Matrix3::from_fn(|i, j| h[i][j] + if i == j { 1e-12 } else { 0.0 });
        let gv = nalgebra::Vector3::new(g[0], g[1], g[2]);
        let step = match hm.cholesky() {
            Some(c) => c.solve(&gv),
            None => gv,
        };
        // halve until the loss does not increase
        let mut t = 1.0;
        let mut next_w = w;
        let mut next = f64::INFINITY;
        for _ in 0..60 {
            next_w = [w[0] - t * step[0], w[1] - t * step[1], w[2] - t * step[2]];
            next = loss_only(z, &next_w);
            if next <= loss {
                break;
            }
            t *= 0.5;
        }
        summary.epochs = epoch;
        if !(next <= loss) {
            summary.converged = true;
            break;
        }
        let delta = loss - next;
        w = next_w;
        loss = next;
        summary.final_loss = loss;
        if delta < cfg.tolerance {
            summary.converged = true;
            break;
        }
    }
    ([w[0], w[1]], w[2], summary)
}

/// Minimizes the mean cross-entropy of z-scored features, starting from
/// zero weights.
pub fn fit(samples: &[TrainingSample], cfg: &TrainConfig) -> Result<(SelectorModel, TrainSummary)> {
    let x: Vec<[f64; 2]> = samples.iter().map(|s| s.features()).collect();
    let y: Vec<u8> = samples.iter().map(|s| s.label).collect();
    fit_features(&x, &y, cfg)
}

/// [`fit`] on raw `(ncols, density)` feature pairs and 0/1 labels.
pub fn fit_features(x: &[[f64; 2]], y: &[u8], cfg: &TrainConfig) -> Result<(SelectorModel, TrainSummary)> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows for {} labels",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 samples, got {}", x.len())));
    }
    let positives = y.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::SingleClass(y.len(), y[0]));
    }
    if cfg.optimizer == Optimizer::GradientDescent && !(cfg.learning_rate > 0.0) {
        return Err(Error::InvalidArgument("learning rate must be positive".into()));
    }

    let (m0, s0) = mean_std(x.iter().map(|f| f[0]));
    let (m1, s1) = mean_std(x.iter().map(|f| f[1]));
    let z: Vec<([f64; 2], f64)> = x
        .iter()
        .zip(y)
        .map(|(f, &l)| ([(f[0] - m0) / s0, (f[1] - m1) / s1], f64::from(l.min(1))))
        .collect();
    let (w, b, summary) = match cfg.optimizer {
        Optimizer::Newton => newton(&z, cfg),
        Optimizer::GradientDescent => gradient_descent(&z, cfg),
    };
    let model = SelectorModel {
        w_ncols: w[0],
        w_density: w[1],
        bias: b,
        feature_means: [m0, m1],
        feature_scales: [s0, s1],
    };
    model.validate()?;
    Ok((model, summary))
}

pub fn train(samples: &[TrainingSample], cfg: &TrainConfig) -> Result<SelectorModel> {
    fit(samples, cfg).map(|(m, _)| m)
}

/// The selector used when no model file is given: trained on
/// [`default_grid`] with every sample labeled by the analytic cost model
/// under `params` at [`DEFAULT_DIM`].
pub fn default_model(params: &crate::perf::CostParams, seed: u64) -> Result<SelectorModel> {
    let samples = collect_samples(&default_grid(seed), &TimingProvider::Analytic(*params), 1, DEFAULT_DIM)?;
    train(&samples, &TrainConfig::default())
}

/// Path for one window. Empty windows map to the scalar path (executors
/// skip them anyway); a zero score selects the tile path.
pub fn classify(model: &SelectorModel, f: &WindowFeatures) -> ExecPath {
    if f.ncols == 0 {
        return ExecPath::Scalar;
    }
    model.predict(f.ncols as f64, f.density)
}

pub fn assign(model: &SelectorModel, windows: &[RowWindow<impl crate::Scalar>]) -> Assignment {
    Assignment(windows.iter().map(|w| classify(model, &w.features())).collect())
}

/// Fraction of samples whose label matches the model's choice.
pub fn accuracy(model: &SelectorModel, samples: &[TrainingSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let hits = samples
        .iter()
        .filter(|s| {
            let want = if s.label == 1 { ExecPath::Scalar } else { ExecPath::Tile };
            model.predict(s.ncols as f64, s.density) == want
        })
        .count();
    hits as f64 / samples.len() as f64
}

/// Deterministic split: shuffle with `seed`, hold out `holdout` of the samples.
pub fn split(samples: &[TrainingSample], holdout: f64, seed: u64) -> (Vec<TrainingSample>, Vec<TrainingSample>) {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = samples.len() - (samples.len() as f64 * holdout).round() as usize;
    let train = idx[..cut].iter().map(|&i| samples[i]).collect();
    let test = idx[cut..].iter().map(|&i| samples[i]).collect();
    (train, test)
}

/// Per-window assignment CSV: `window_id,path,nnz,ncols,density`.
pub fn write_assignment_csv<T: crate::Scalar>(
    windows: &[RowWindow<T>],
    assignment: &Assignment,
    path: impl AsRef<Path>,
) -> Result<()> {
    use std::io::Write;
    let path = path.as_ref();
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    let res = (|| -> std::io::Result<()> {
        writeln!(w, "window_id,path,nnz,ncols,density")?;
        for (win, p) in windows.iter().zip(assignment.paths()) {
            let f = win.features();
            writeln!(w, "{},{},{},{},{}", win.window_id(), p.as_str(), f.nnz, f.ncols, f.density)?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}
