//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any failed.

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use hcspmm_core::exec::{Assignment, WindowedMatrix};
use hcspmm_core::generate::{block_community, clique, gnp, path, scramble, star};
use hcspmm_core::gnn::{backward, forward, normalize_adj_with, FusionMode, GnnLayer, GnnPlan, Normalization};
use hcspmm_core::loa::{
    build_windows_basic, build_windows_optimized, build_windows_optimized_observed, ci_candidate, reorder,
    LoaObserver, LoaState, Ratio, DEFAULT_VW,
};
use hcspmm_core::perf::{density_crossover, estimate_scalar, estimate_tile, CostParams};
use hcspmm_core::select::{self, TrainConfig};
use hcspmm_core::{
    spmm_dense_oracle, spmm_hybrid, spmm_scalar, spmm_tile, DenseMatrix, ExecPath, Graph, Scalar, SparseCsr,
    WindowFeatures,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(limit: Duration, elapsed: Duration) -> Outcome {
    if elapsed <= limit {
        Ok(String::new())
    } else {
        Err(format!("took {:.1}s, limit {:.0}s", elapsed.as_secs_f64(), limit.as_secs_f64()))
    }
}

/// Normwise relative error: max |got - want| / max |want|.
fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let diff = got.iter().zip(want).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn to_f64<T: Scalar>(m: &DenseMatrix<T>) -> Vec<f64> {
    m.data().iter().map(|&v| v.to_f64()).collect()
}

fn union_of(g: &Graph, vs: &[usize]) -> BTreeSet<usize> {
    vs.iter().flat_map(|&v| g.neighbors(v).iter().copied()).collect()
}

// ---------------------------------------------------------------- 1

/// Row-by-row product straight from the triplet list, accumulated in f64.
fn triplet_oracle(n: usize, t: &[(usize, usize, f64)], x: &[f64], dim: usize) -> Vec<f64> {
    let mut z = vec![0.0; n * dim];
    for &(i, j, v) in t {
        for c in 0..dim {
            z[i * dim + c] += v * x[j * dim + c];
        }
    }
    z
}

fn check_precision<T: Scalar>(
    a: &SparseCsr<T>,
    x: &DenseMatrix<T>,
    assignment: &Assignment,
    reference: &[f64],
    tol: f64,
    label: &str,
) -> Result<f64, String> {
    let m = WindowedMatrix::new(a, 16).map_err(|e| e.to_string())?;
    let dense = spmm_dense_oracle(a, x).map_err(|e| e.to_string())?;
    let runs = [
        ("scalar", spmm_scalar(a, x).map_err(|e| e.to_string())?.z),
        ("tile", spmm_tile(&m, x).map_err(|e| e.to_string())?.z),
        ("hybrid", spmm_hybrid(&m, assignment, x).map_err(|e| e.to_string())?.z),
    ];
    let mut worst = 0.0f64;
    for (name, z) in &runs {
        let e_dense = rel_err(&to_f64(z), &to_f64(&dense));
        let e_ref = rel_err(&to_f64(z), reference);
        ensure!(
            e_dense <= tol && e_ref <= tol,
            "{label} {name}: error {e_dense:e} vs dense oracle, {e_ref:e} vs triplet oracle"
        );
        worst = worst.max(e_dense).max(e_ref);
    }
    Ok(worst)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let (worst64, worst32, largest) = pool.install(|| -> Result<(f64, f64, usize), String> {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let (mut w64, mut w32, mut largest) = (0.0f64, 0.0f64, 0);
        for k in 0..50 {
            // cover both ends of the size range
            let n = match k {
                0 => 64,
                1 => 2048,
                _ => rng.gen_range(64..=2048),
            };
            let density = rng.gen_range(0.001..=0.05);
            let dim = [16, 32, 47, 96][k % 4];
            let target = ((n * n) as f64 * density).round() as usize;
            let mut t: Vec<(usize, usize, f64)> = (0..target)
                .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(-1.0..=1.0)))
                .collect();
            t.sort_by_key(|&(i, j, _)| (i, j));
            t.dedup_by_key(|&mut (i, j, _)| (i, j));
            let a = SparseCsr::from_triplets(n, n, &t).map_err(|e| e.to_string())?;
            let x = DenseMatrix::<f64>::from_fn(n, dim, |_, _| rng.gen_range(-1.0..=1.0));
            let windows = n.div_ceil(16);
            let assignment = Assignment(
                (0..windows)
                    .map(|_| if rng.gen_bool(0.5) { ExecPath::Tile } else { ExecPath::Scalar })
                    .collect(),
            );
            largest = largest.max(n);

            let reference = triplet_oracle(n, &t, x.data(), dim);
            w64 = w64.max(check_precision(&a, &x, &assignment, &reference, 1e-12, &format!("n={n} dim={dim} f64"))?);

            let a32 = a.cast::<f32>();
            let x32 = x.cast::<f32>();
            let t32: Vec<(usize, usize, f64)> = t.iter().map(|&(i, j, v)| (i, j, f64::from(v as f32))).collect();
            let x32_wide: Vec<f64> = x32.data().iter().map(|&v| f64::from(v)).collect();
            let reference32 = triplet_oracle(n, &t32, &x32_wide, dim);
            w32 = w32.max(check_precision(&a32, &x32, &assignment, &reference32, 1e-5, &format!("n={n} dim={dim} f32"))?);
        }
        Ok((w64, w32, largest))
    })?;
    within(Duration::from_secs(60), start.elapsed())?;
    Ok(format!(
        "50 matrices up to n={largest}; max rel err f64 {worst64:.1e} (<= 1e-12), f32 {worst32:.1e} (<= 1e-5)"
    ))
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let params = CostParams::defaults();
    let grid = select::default_grid(42);
    ensure!(grid.len() >= 5000, "grid has only {} points", grid.len());
    let provider = hcspmm_core::perf::TimingProvider::Analytic(params);
    let samples = select::collect_samples(&grid, &provider, 1, select::DEFAULT_DIM).map_err(|e| e.to_string())?;

    // labels recomputed from the cost formulas
    let dblocks = 2.0; // dim 32 in blocks of 16
    for s in &samples {
        ensure!((1..=130).contains(&s.ncols), "ncols {} outside 1..=130", s.ncols);
        ensure!(
            s.density >= 1.0 / 16.0 - 1e-12 && s.density <= 15.0 / 16.0 + 1e-12,
            "density {} outside [1/16, 15/16]",
            s.density
        );
        let nnz = (s.density * 16.0 * s.ncols as f64).round();
        let ts = params.alpha_scalar + params.beta_scalar * nnz * 32.0;
        let tt = params.alpha_tile
            + (s.ncols as f64 / 8.0).ceil() * dblocks * params.beta_tile
            + s.ncols as f64 * dblocks * params.gamma_tile;
        ensure!(s.label == u8::from(ts < tt), "label mismatch at ncols={} density={}", s.ncols, s.density);
    }

    let (train, test) = select::split(&samples, 0.2, 42);
    let (model, _) = select::fit(&train, &TrainConfig::default()).map_err(|e| e.to_string())?;
    let hits = test
        .iter()
        .filter(|s| {
            let want = if s.label == 1 { ExecPath::Scalar } else { ExecPath::Tile };
            model.predict(s.ncols as f64, s.density) == want
        })
        .count();
    let acc = hits as f64 / test.len() as f64;
    ensure!(acc >= 0.90, "held-out accuracy {acc:.4} < 0.90");
    within(Duration::from_secs(30), start.elapsed())?;
    Ok(format!("{} samples, held-out accuracy {acc:.4} on {} windows (>= 0.90)", samples.len(), test.len()))
}

// ---------------------------------------------------------------- 3

fn loa_corpus() -> Vec<(String, Graph)> {
    let mut out: Vec<(String, Graph)> = Vec::new();
    for n in [17, 300, 2000] {
        out.push((format!("path {n}"), path(n)));
    }
    for n in [17, 300, 2000] {
        out.push((format!("star {n}"), star(n)));
    }
    for n in [16, 33, 100] {
        out.push((format!("clique {n}"), clique(n)));
    }
    for (i, (n, p)) in [
        (64, 0.1),
        (100, 0.05),
        (200, 0.03),
        (300, 0.02),
        (500, 0.01),
        (800, 0.008),
        (1000, 0.005),
        (1500, 0.003),
        (2000, 0.002),
        (2000, 0.005),
    ]
    .into_iter()
    .enumerate()
    {
        out.push((format!("gnp {n} {p}"), gnp(n, p, 100 + i as u64)));
    }
    for (i, (c, s, pin, pout)) in [
        (4, 16, 0.6, 0.02),
        (8, 16, 0.6, 0.01),
        (10, 12, 0.5, 0.02),
        (16, 16, 0.6, 0.005),
        (32, 16, 0.6, 0.005),
        (20, 20, 0.4, 0.01),
        (50, 16, 0.6, 0.002),
        (64, 16, 0.7, 0.005),
        (100, 16, 0.6, 0.003),
        (125, 16, 0.6, 0.005),
        (60, 30, 0.3, 0.002),
    ]
    .into_iter()
    .enumerate()
    {
        let seed = 200 + i as u64;
        let g = block_community(c, s, pin, pout, seed);
        // half of the block graphs keep generator order, half are scrambled
        let g = if i % 2 == 0 { g } else { scramble(&g, seed).unwrap().0 };
        out.push((format!("block {c}x{s}"), g));
    }
    out
}

#[derive(Default)]
struct CnsChecker {
    boundaries: usize,
    failure: Option<String>,
}

impl LoaObserver for CnsChecker {
    fn on_scan(&mut self, st: &LoaState) {
        if self.failure.is_some() {
            return;
        }
        self.boundaries += 1;
        let g = st.graph();
        let cols = union_of(g, st.window());
        for v in 0..g.num_vertices() {
            let want = g.neighbors(v).iter().filter(|c| cols.contains(c)).count();
            if st.cns(v) as usize != want {
                self.failure = Some(format!("cns[{v}] = {} but |N(v) & all_cols| = {want}", st.cns(v)));
                return;
            }
        }
    }
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let corpus = loa_corpus();
    ensure!(corpus.len() == 30, "corpus has {} graphs", corpus.len());
    let mut boundaries = 0;
    for (name, g) in &corpus {
        ensure!(g.num_vertices() <= 2000, "{name} has {} vertices", g.num_vertices());
        let basic = build_windows_basic(g, DEFAULT_VW).map_err(|e| e.to_string())?;
        let mut checker = CnsChecker::default();
        let optimized = build_windows_optimized_observed(g, DEFAULT_VW, &mut checker).map_err(|e| e.to_string())?;
        if let Some(f) = checker.failure {
            return Err(format!("{name}: {f}"));
        }
        ensure!(basic == optimized, "{name}: groupings differ");
        ensure!(
            build_windows_optimized(g, DEFAULT_VW).map_err(|e| e.to_string())? == optimized,
            "{name}: observer changed the result"
        );
        boundaries += checker.boundaries;
    }
    within(Duration::from_secs(120), start.elapsed())?;
    Ok(format!("30 graphs identical; cns checked at {boundaries} iteration boundaries"))
}

// ---------------------------------------------------------------- 4

/// Mean of nnz / distinct columns over the non-empty 16-row blocks.
fn mean_ci_oracle(a: &SparseCsr<f64>) -> f64 {
    let mut cis = Vec::new();
    for start in (0..a.num_rows()).step_by(16) {
        let end = (start + 16).min(a.num_rows());
        let mut cols = BTreeSet::new();
        let mut nnz = 0;
        for i in start..end {
            let (c, _) = a.row(i);
            nnz += c.len();
            cols.extend(c.iter().copied());
        }
        if nnz > 0 {
            cis.push(nnz as f64 / cols.len() as f64);
        }
    }
    cis.iter().sum::<f64>() / cis.len() as f64
}

fn criterion_4() -> Outcome {
    let g = block_community(128, 16, 0.6, 0.005, 7);
    ensure!(g.num_vertices() == 2048, "graph has {} vertices", g.num_vertices());
    let (g, _) = scramble(&g, 11).map_err(|e| e.to_string())?;
    let model = select::default_model(&CostParams::defaults(), 42).map_err(|e| e.to_string())?;
    let grouping = build_windows_optimized(&g, DEFAULT_VW).map_err(|e| e.to_string())?;
    let (h, _) = reorder(&g, &grouping).map_err(|e| e.to_string())?;

    let tiles = |a: &SparseCsr<f64>| -> Result<usize, String> {
        let w = hcspmm_core::partition(a, 16).map_err(|e| e.to_string())?;
        Ok(select::assign(&model, &w).count(ExecPath::Tile))
    };
    let (ci0, ci1) = (mean_ci_oracle(g.adjacency()), mean_ci_oracle(h.adjacency()));
    let (t0, t1) = (tiles(g.adjacency())?, tiles(h.adjacency())?);
    ensure!(ci1 > ci0, "mean CI did not increase: {ci0:.4} -> {ci1:.4}");
    ensure!(t1 > t0, "tile windows did not increase: {t0} -> {t1}");
    Ok(format!("mean CI {ci0:.3} -> {ci1:.3}; tile windows {t0} -> {t1} of 128"))
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let p = CostParams::defaults();
    let tile: Vec<f64> = (32..=480)
        .map(|nnz| estimate_tile(&WindowFeatures::from_counts(nnz, 32, 16), 32, &p))
        .collect();
    let tile_spread = tile.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - tile.iter().cloned().fold(f64::INFINITY, f64::min);
    ensure!(tile_spread == 0.0, "tile estimate varies by {tile_spread:e} over density");

    let mut scalar_spread = 0.0f64;
    for nnz in [16usize, 64, 200, 480] {
        let s: Vec<f64> = (nnz.div_ceil(16)..=nnz.min(130))
            .map(|ncols| estimate_scalar(&WindowFeatures::from_counts(nnz, ncols, 16), 32, &p))
            .collect();
        let spread = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - s.iter().cloned().fold(f64::INFINITY, f64::min);
        scalar_spread = scalar_spread.max(spread);
    }
    ensure!(scalar_spread == 0.0, "scalar estimate varies by {scalar_spread:e} over ncols");

    // sign change of t_scalar - t_tile along the sweep, from the formulas
    let t_tile = p.alpha_tile + 4.0 * 2.0 * p.beta_tile + 32.0 * 2.0 * p.gamma_tile;
    let below = p.alpha_scalar + p.beta_scalar * 32.0 * 32.0 < t_tile;
    let above = p.alpha_scalar + p.beta_scalar * 480.0 * 32.0 >= t_tile;
    ensure!(below && above, "no sign change between density 1/16 and 15/16");
    let c = density_crossover(&p, 32, 32).ok_or("density_crossover found none")?;
    within(Duration::from_secs(1), start.elapsed())?;
    Ok(format!("tile spread 0, scalar spread 0, crossover at density {c}"))
}

// ---------------------------------------------------------------- 6

fn mixed_plan(a: &SparseCsr<f64>) -> Result<GnnPlan<f64>, String> {
    GnnPlan::new(a, |m| {
        Assignment(
            (0..m.windows().len())
                .map(|i| if i % 2 == 0 { ExecPath::Tile } else { ExecPath::Scalar })
                .collect(),
        )
    })
    .map_err(|e| e.to_string())
}

/// (A X) W with dense loops.
fn dense_layer(a: &SparseCsr<f64>, x: &DenseMatrix<f64>, w: &DenseMatrix<f64>) -> Vec<f64> {
    let (n, d_in, d_out) = (a.num_rows(), x.dim(), w.dim());
    let ad = a.to_dense();
    let mut z = vec![0.0; n * d_in];
    for i in 0..n {
        for k in 0..n {
            for c in 0..d_in {
                z[i * d_in + c] += ad[i * n + k] * x.get(k, c);
            }
        }
    }
    let mut y = vec![0.0; n * d_out];
    for i in 0..n {
        for c in 0..d_in {
            for o in 0..d_out {
                y[i * d_out + o] += z[i * d_in + c] * w.get(c, o);
            }
        }
    }
    y
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut worst_mode = 0.0f64;
    for (name, g) in [("gnp 400", gnp(400, 0.02, 3)), ("block 16x16", block_community(16, 16, 0.5, 0.01, 4))] {
        for norm in [Normalization::Symmetric, Normalization::RowNormalized] {
            let a = normalize_adj_with(&g, norm);
            let plan = mixed_plan(&a)?;
            let layer = GnnLayer::<f64>::random(24, 10, 5);
            let x = DenseMatrix::<f64>::random(g.num_vertices(), 24, 6);
            let up = DenseMatrix::<f64>::random(g.num_vertices(), 10, 7);
            let fu = forward(&layer, &plan, &x, FusionMode::Unfused).map_err(|e| e.to_string())?;
            let ff = forward(&layer, &plan, &x, FusionMode::Fused).map_err(|e| e.to_string())?;
            let bu = backward(&layer, &plan, &fu.z_cache, &up, FusionMode::Unfused).map_err(|e| e.to_string())?;
            let bf = backward(&layer, &plan, &ff.z_cache, &up, FusionMode::Fused).map_err(|e| e.to_string())?;
            let errs = [
                rel_err(ff.x_next.data(), fu.x_next.data()),
                rel_err(bf.grad_w.data(), bu.grad_w.data()),
                rel_err(bf.grad_x.data(), bu.grad_x.data()),
                rel_err(fu.x_next.data(), &dense_layer(&a, &x, layer.weight())),
            ];
            let e = errs.iter().cloned().fold(0.0, f64::max);
            ensure!(e <= 1e-12, "{name} {}: fused/unfused differ by {e:e}", norm.as_str());
            worst_mode = worst_mode.max(e);

            ensure!(
                ff.traffic.intermediate_writes == 0 && ff.traffic.pass_launches == 1,
                "fused forward traffic {:?}",
                ff.traffic
            );
            ensure!(fu.traffic.pass_launches == 2, "unfused forward traffic {:?}", fu.traffic);
            ensure!(
                bf.traffic.intermediate_writes == 0 && bf.traffic.pass_launches == 1,
                "fused backward traffic {:?}",
                bf.traffic
            );
            ensure!(bu.traffic.pass_launches == 2, "unfused backward traffic {:?}", bu.traffic);
        }
    }

    // central differences of L = sum(up .* X') with respect to W
    let g = Graph::from_edges(10, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (5, 6), (6, 7), (7, 8), (8, 9), (2, 7)], true)
        .map_err(|e| e.to_string())?;
    let a = normalize_adj_with(&g, Normalization::Symmetric);
    let plan = mixed_plan(&a)?;
    let layer = GnnLayer::<f64>::random(4, 3, 8);
    let x = DenseMatrix::<f64>::random(10, 4, 9);
    let up = DenseMatrix::<f64>::random(10, 3, 10);
    let loss = |l: &GnnLayer<f64>| -> f64 {
        let y = dense_layer(&a, &x, l.weight());
        y.iter().zip(up.data()).map(|(p, q)| p * q).sum()
    };
    let h = 1e-5;
    let mut fd = Vec::new();
    for k in 0..12 {
        let mut plus = layer.clone();
        plus.weight_mut().data_mut()[k] += h;
        let mut minus = layer.clone();
        minus.weight_mut().data_mut()[k] -= h;
        fd.push((loss(&plus) - loss(&minus)) / (2.0 * h));
    }
    let mut worst_fd = 0.0f64;
    for mode in [FusionMode::Unfused, FusionMode::Fused] {
        let f = forward(&layer, &plan, &x, mode).map_err(|e| e.to_string())?;
        let b = backward(&layer, &plan, &f.z_cache, &up, mode).map_err(|e| e.to_string())?;
        let e = rel_err(b.grad_w.data(), &fd);
        ensure!(e <= 1e-6, "{} grad_w off finite differences by {e:e}", mode.as_str());
        worst_fd = worst_fd.max(e);
    }
    within(Duration::from_secs(10), start.elapsed())?;
    Ok(format!(
        "fused vs unfused {worst_mode:.1e} (<= 1e-12); grad_w vs finite differences {worst_fd:.1e} (<= 1e-6); fused 1 pass, 0 intermediate writes"
    ))
}

// ---------------------------------------------------------------- 7

struct PairChecker {
    rng: ChaCha8Rng,
    rate: f64,
    checked: usize,
    target: usize,
    failure: Option<String>,
}

impl LoaObserver for PairChecker {
    fn on_candidate(&mut self, st: &LoaState, v: usize, score: Ratio) {
        if self.failure.is_some() || self.checked >= self.target || !self.rng.gen_bool(self.rate) {
            return;
        }
        self.checked += 1;
        let g = st.graph();
        let mut trial = st.window().to_vec();
        trial.push(v);
        let eles: u64 = trial.iter().map(|&u| g.degree(u) as u64).sum();
        let cols = union_of(g, &trial).len() as u64;
        let want = if cols == 0 { (0, 1) } else { (eles, cols) };
        let direct = ci_candidate(v, st);
        if (score.num, score.den) != want || (direct.num, direct.den) != want {
            self.failure = Some(format!(
                "candidate {v} of window {:?}: counters give {}/{}, union gives {}/{}",
                st.window(),
                direct.num,
                direct.den,
                want.0,
                want.1
            ));
        }
    }
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut checker = PairChecker {
        rng: ChaCha8Rng::seed_from_u64(77),
        rate: 0.25,
        checked: 0,
        target: 10_000,
        failure: None,
    };
    let graphs = [
        scramble(&block_community(64, 16, 0.6, 0.005, 1), 2).unwrap().0,
        gnp(1000, 0.008, 3),
        scramble(&block_community(40, 20, 0.4, 0.01, 4), 5).unwrap().0,
        gnp(2000, 0.003, 6),
        scramble(&block_community(125, 16, 0.6, 0.004, 7), 8).unwrap().0,
    ];
    for g in &graphs {
        if checker.checked >= checker.target {
            break;
        }
        build_windows_optimized_observed(g, DEFAULT_VW, &mut checker).map_err(|e| e.to_string())?;
        if let Some(f) = checker.failure.take() {
            return Err(f);
        }
    }
    ensure!(checker.checked >= 10_000, "only {} pairs sampled", checker.checked);
    within(Duration::from_secs(30), start.elapsed())?;
    Ok(format!("{} sampled pairs, exact numerator/denominator match", checker.checked))
}

// ---------------------------------------------------------------- 8

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_hcspmm"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn metrics(report: &[u8]) -> Result<serde_json::Value, String> {
    let v: serde_json::Value = serde_json::from_slice(report).map_err(|e| e.to_string())?;
    Ok(v["metrics"].clone())
}

fn criterion_8() -> Outcome {
    let threads = std::thread::available_parallelism().map_or(4, |n| n.get()).max(4).to_string();
    let runs: [&[&str]; 4] = [
        &["--seed", "7", "pipeline", "--graph", "gen:block:128:16:0.6:0.005", "--scramble", "11", "--loa"],
        &["--seed", "3", "pipeline", "--graph", "gen:gnp:1500:0.004", "--dim", "47"],
        &["--seed", "5", "--precision", "f32", "pipeline", "--graph", "gen:gnp:800:0.01", "--loa", "--vw", "32"],
        &["--seed", "9", "spmm", "--matrix", "gen:gnp:1000:0.01", "--mode", "hybrid", "--dense", "random:dim=96"],
    ];
    for args in runs {
        let one: Vec<&str> = ["--threads", "1"].iter().copied().chain(args.iter().copied()).collect();
        let many: Vec<&str> = ["--threads", threads.as_str()].iter().copied().chain(args.iter().copied()).collect();
        let a = run_cli(&one)?;
        let b = run_cli(&one)?;
        ensure!(a == b, "{args:?}: reports differ between two --threads 1 runs");
        let c = run_cli(&many)?;
        ensure!(
            metrics(&a)? == metrics(&c)?,
            "{args:?}: metrics differ between --threads 1 and --threads {threads}"
        );
    }
    Ok(format!("4 runs byte-identical at --threads 1, metrics identical at --threads {threads}"))
}

// ---------------------------------------------------------------- driver

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 executor oracle equivalence", criterion_1),
        ("2 selector accuracy", criterion_2),
        ("3 LOA oracle equivalence", criterion_3),
        ("4 LOA improvement direction", criterion_4),
        ("5 cost-model structure", criterion_5),
        ("6 GNN fusion and gradients", criterion_6),
        ("7 candidate score identity", criterion_7),
        ("8 determinism", criterion_8),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  criterion {name} ({secs:.2}s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  criterion {name} ({secs:.2}s): {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
