//! Single GNN layer `X' = (A_bar X) W` on top of the hybrid executor, with
//! an unfused two-pass mode and a fused per-window mode, plus counters for
//! the intermediate `Z` traffic each mode generates.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{run_window, spmm_hybrid, Assignment, TileScratch, WindowedMatrix};
use crate::matrix::{gemm_row, DenseMatrix, Graph, SparseCsr};
use crate::scalar::Scalar;
use crate::window::WINDOW_HEIGHT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `D^-1/2 (A + I) D^-1/2`, `D` the degrees of `A + I`.
    #[default]
    Symmetric,
    /// `D^-1 A`; rows without entries stay zero.
    RowNormalized,
    Raw,
    /// `A + I`, the sum aggregation used by GIN.
    SelfLoops,
}

impl Normalization {
    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::Symmetric => "symmetric",
            Normalization::RowNormalized => "row_normalized",
            Normalization::Raw => "raw",
            Normalization::SelfLoops => "self_loops",
        }
    }
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(Normalization::Symmetric),
            "row_normalized" | "row" => Ok(Normalization::RowNormalized),
            "raw" => Ok(Normalization::Raw),
            "self_loops" | "gin" => Ok(Normalization::SelfLoops),
            other => Err(Error::InvalidArgument(format!("unknown normalization {other:?}"))),
        }
    }
}

/// Symmetric GCN normalization of the graph's adjacency.
pub fn normalize_adj(g: &Graph) -> SparseCsr<f64> {
    normalize_adj_with(g, Normalization::Symmetric)
}

pub fn normalize_adj_with(g: &Graph, norm: Normalization) -> SparseCsr<f64> {
    let a = g.adjacency();
    let n = a.num_rows();
    match norm {
        Normalization::Raw => a.clone(),
        Normalization::SelfLoops => with_identity(a),
        Normalization::RowNormalized => {
            let mut t = Vec::with_capacity(a.nnz());
            for i in 0..n {
                let (cols, vals) = a.row(i);
                let d: f64 = vals.iter().sum();
                let inv = if d != 0.0 { 1.0 / d } else { 0.0 };
                t.extend(cols.iter().zip(vals).map(|(&j, &v)| (i, j, v * inv)));
            }
            SparseCsr::from_triplets(n, n, &t).expect("entries in range")
        }
        Normalization::Symmetric => {
            let at = with_identity(a);
            let d: Vec<f64> = (0..n).map(|i| at.row(i).1.iter().sum()).collect();
            // d[i] * d[j] commutes, so symmetric input stays exactly symmetric
            at.map_indexed(|i, j, v| {
                let dd = d[i] * d[j];
                if dd > 0.0 {
                    v / dd.sqrt()
                } else {
                    0.0
                }
            })
        }
    }
}

fn with_identity(a: &SparseCsr<f64>) -> SparseCsr<f64> {
    let n = a.num_rows();
    let mut t = a.triplets();
    t.extend((0..n).map(|i| (i, i, 1.0)));
    SparseCsr::from_triplets(n, n, &t).expect("entries in range")
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnLayer<T = f64> {
    weight: DenseMatrix<T>,
}

impl<T: Scalar> GnnLayer<T> {
    pub fn new(weight: DenseMatrix<T>) -> Self {
        Self { weight }
    }

    /// Glorot-uniform weights.
    pub fn random(d_in: usize, d_out: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let limit = (6.0 / (d_in + d_out).max(1) as f64).sqrt();
        let weight = DenseMatrix::from_fn(d_in, d_out, |_, _| T::from_f64(rng.gen_range(-limit..limit)));
        Self { weight }
    }

    pub fn weight(&self) -> &DenseMatrix<T> {
        &self.weight
    }

    pub fn weight_mut(&mut self) -> &mut DenseMatrix<T> {
        &mut self.weight
    }

    pub fn d_in(&self) -> usize {
        self.weight.rows()
    }

    pub fn d_out(&self) -> usize {
        self.weight.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    Unfused,
    Fused,
}

impl FusionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FusionMode::Unfused => "unfused",
            FusionMode::Fused => "fused",
        }
    }
}

/// Scalar values moved through global buffers by one layer direction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficReport {
    /// Values of `Z` (or `grad_z`) written to a global buffer between passes.
    pub intermediate_writes: u64,
    /// Values of that buffer read back by the following pass.
    pub intermediate_reads: u64,
    pub pass_launches: u32,
    /// Values written by the extra pass that keeps `Z` for backward.
    pub cache_writes: u64,
    pub cache_passes: u32,
}

/// Windowed `A_bar` plus the per-window paths, for both directions. When
/// `A_bar` is not symmetric the backward direction runs on its transpose.
#[derive(Debug, Clone)]
pub struct GnnPlan<T = f64> {
    forward: WindowedMatrix<T>,
    forward_paths: Assignment,
    backward: Option<(WindowedMatrix<T>, Assignment)>,
}

impl<T: Scalar> GnnPlan<T> {
    pub fn new(a_norm: &SparseCsr<T>, mut choose: impl FnMut(&WindowedMatrix<T>) -> Assignment) -> Result<Self> {
        if !a_norm.is_square() {
            return Err(Error::NotSquare {
                rows: a_norm.num_rows(),
                cols: a_norm.num_cols(),
            });
        }
        let forward = WindowedMatrix::new(a_norm, WINDOW_HEIGHT)?;
        let forward_paths = choose(&forward);
        check_paths(&forward, &forward_paths)?;
        let backward = if a_norm.is_symmetric() {
            None
        } else {
            let t = WindowedMatrix::new(&a_norm.transpose(), WINDOW_HEIGHT)?;
            let paths = choose(&t);
            check_paths(&t, &paths)?;
            Some((t, paths))
        };
        Ok(Self {
            forward,
            forward_paths,
            backward,
        })
    }

    pub fn uniform(a_norm: &SparseCsr<T>, path: crate::exec::ExecPath) -> Result<Self> {
        Self::new(a_norm, |m| Assignment::uniform(m.windows().len(), path))
    }

    pub fn num_vertices(&self) -> usize {
        self.forward.num_rows()
    }

    pub fn windows(&self) -> &WindowedMatrix<T> {
        &self.forward
    }

    pub fn assignment(&self) -> &Assignment {
        &self.forward_paths
    }

    pub fn is_symmetric(&self) -> bool {
        self.backward.is_none()
    }

    fn backward_parts(&self) -> (&WindowedMatrix<T>, &Assignment) {
        match &self.backward {
            Some((m, a)) => (m, a),
            None => (&self.forward, &self.forward_paths),
        }
    }
}

fn check_paths<T: Scalar>(m: &WindowedMatrix<T>, a: &Assignment) -> Result<()> {
    if a.len() != m.windows().len() {
        return Err(Error::DimensionMismatch(format!(
            "assignment has {} entries for {} windows",
            a.len(),
            m.windows().len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput<T = f64> {
    pub x_next: DenseMatrix<T>,
    pub z_cache: DenseMatrix<T>,
    pub traffic: TrafficReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackwardOutput<T = f64> {
    pub grad_w: DenseMatrix<T>,
    pub grad_x: DenseMatrix<T>,
    pub traffic: TrafficReport,
}

pub fn forward<T: Scalar>(
    layer: &GnnLayer<T>,
    plan: &GnnPlan<T>,
    x: &DenseMatrix<T>,
    mode: FusionMode,
) -> Result<ForwardOutput<T>> {
    let n = plan.num_vertices();
    if x.rows() != n || x.dim() != layer.d_in() {
        return Err(Error::DimensionMismatch(format!(
            "features are {}x{}, layer expects {}x{}",
            x.rows(),
            x.dim(),
            n,
            layer.d_in()
        )));
    }
    let d_in = layer.d_in() as u64;
    let values = n as u64 * d_in;
    let z = spmm_hybrid(&plan.forward, &plan.forward_paths, x)?.z;
    match mode {
        FusionMode::Unfused => {
            let x_next = z.matmul(layer.weight())?;
            Ok(ForwardOutput {
                x_next,
                z_cache: z,
                traffic: TrafficReport {
                    intermediate_writes: values,
                    intermediate_reads: values,
                    pass_launches: 2,
                    ..TrafficReport::default()
                },
            })
        }
        FusionMode::Fused => {
            let x_next = fused_pass(&plan.forward, &plan.forward_paths, x, layer.weight());
            Ok(ForwardOutput {
                x_next,
                z_cache: z,
                traffic: TrafficReport {
                    pass_launches: 1,
                    cache_writes: values,
                    cache_passes: 1,
                    ..TrafficReport::default()
                },
            })
        }
    }
}

/// Per window: aggregate the window's rows of `A x` into scratch, multiply
/// by `w` and write only the product.
fn fused_pass<T: Scalar>(
    m: &WindowedMatrix<T>,
    paths: &Assignment,
    x: &DenseMatrix<T>,
    w: &DenseMatrix<T>,
) -> DenseMatrix<T> {
    let (d_in, d_out) = (x.dim(), w.dim());
    let mut out = DenseMatrix::zeros(m.num_rows(), d_out);
    if d_out == 0 || m.num_rows() == 0 {
        return out;
    }
    let height = m.height();
    out.data_mut()
        .par_chunks_mut(height * d_out)
        .zip(m.windows().par_iter())
        .zip(paths.paths().par_iter())
        .for_each_init(
            || (TileScratch::new(d_in), vec![T::zero(); height * d_in]),
            |(scratch, agg), ((dst, win), &path)| {
                let rows = win.row_count();
                let agg = &mut agg[..rows * d_in];
                agg.fill(T::zero());
                run_window(win, path, x, agg, scratch);
                for r in 0..rows {
                    gemm_row(&agg[r * d_in..(r + 1) * d_in], w, &mut dst[r * d_out..(r + 1) * d_out]);
                }
            },
        );
    out
}

pub fn backward<T: Scalar>(
    layer: &GnnLayer<T>,
    plan: &GnnPlan<T>,
    z_cache: &DenseMatrix<T>,
    grad_next: &DenseMatrix<T>,
    mode: FusionMode,
) -> Result<BackwardOutput<T>> {
    let n = plan.num_vertices();
    if z_cache.rows() != n || z_cache.dim() != layer.d_in() {
        return Err(Error::DimensionMismatch(format!(
            "cached Z is {}x{}, expected {}x{}",
            z_cache.rows(),
            z_cache.dim(),
            n,
            layer.d_in()
        )));
    }
    if grad_next.rows() != n || grad_next.dim() != layer.d_out() {
        return Err(Error::DimensionMismatch(format!(
            "output gradient is {}x{}, expected {}x{}",
            grad_next.rows(),
            grad_next.dim(),
            n,
            layer.d_out()
        )));
    }
    let (m, paths) = plan.backward_parts();
    let wt = layer.weight().transpose();
    let values = n as u64 * layer.d_in() as u64;
    match mode {
        FusionMode::Unfused => {
            let grad_w = z_cache.transpose_matmul(grad_next)?;
            let grad_z = grad_next.matmul(&wt)?;
            let grad_x = spmm_hybrid(m, paths, &grad_z)?.z;
            Ok(BackwardOutput {
                grad_w,
                grad_x,
                traffic: TrafficReport {
                    intermediate_writes: values,
                    intermediate_reads: values,
                    pass_launches: 2,
                    ..TrafficReport::default()
                },
            })
        }
        FusionMode::Fused => {
            let (grad_w, grad_x) = fused_backward(m, paths, z_cache, grad_next, &wt);
            Ok(BackwardOutput {
                grad_w,
                grad_x,
                traffic: TrafficReport {
                    pass_launches: 1,
                    ..TrafficReport::default()
                },
            })
        }
    }
}

/// One pass per window: `Z[R]^T G[R]` into a partial `grad_w`, then
/// `(A[R, :] G) W^T` into `grad_x[R]`. Partials are summed in window order.
fn fused_backward<T: Scalar>(
    m: &WindowedMatrix<T>,
    paths: &Assignment,
    z: &DenseMatrix<T>,
    g: &DenseMatrix<T>,
    wt: &DenseMatrix<T>,
) -> (DenseMatrix<T>, DenseMatrix<T>) {
    let (d_in, d_out) = (z.dim(), g.dim());
    let mut grad_x = DenseMatrix::zeros(m.num_rows(), d_in);
    if m.num_rows() == 0 || d_in == 0 {
        return (DenseMatrix::zeros(d_in, d_out), grad_x);
    }
    let height = m.height();
    let partials: Vec<Vec<T>> = grad_x
        .data_mut()
        .par_chunks_mut(height * d_in)
        .zip(m.windows().par_iter())
        .zip(paths.paths().par_iter())
        .map_init(
            || (TileScratch::new(d_out), vec![T::zero(); height * d_out]),
            |(scratch, agg), ((dst, win), &path)| {
                let mut part = vec![T::zero(); d_in * d_out];
                for r in win.rows() {
                    let zr = z.row(r);
                    let gr = g.row(r);
                    for (i, &zi) in zr.iter().enumerate() {
                        for (p, &gv) in part[i * d_out..(i + 1) * d_out].iter_mut().zip(gr) {
                            *p = *p + zi * gv;
                        }
                    }
                }
                let rows = win.row_count();
                let agg = &mut agg[..rows * d_out];
                agg.fill(T::zero());
                run_window(win, path, g, agg, scratch);
                for r in 0..rows {
                    gemm_row(&agg[r * d_out..(r + 1) * d_out], wt, &mut dst[r * d_in..(r + 1) * d_in]);
                }
                part
            },
        )
        .collect();

    let mut grad_w = DenseMatrix::zeros(d_in, d_out);
    for part in &partials {
        for (acc, &p) in grad_w.data_mut().iter_mut().zip(part) {
            *acc = *acc + p;
        }
    }
    (grad_w, grad_x)
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeBench {
    pub mode: FusionMode,
    pub forward_seconds: f64,
    pub backward_seconds: f64,
    pub forward_traffic: TrafficReport,
    pub backward_traffic: TrafficReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct LayerBench {
    pub num_vertices: usize,
    pub d_in: usize,
    pub d_out: usize,
    pub repeats: usize,
    pub modes: Vec<ModeBench>,
    /// Largest normwise difference between the modes' outputs and gradients;
    /// 0 when only one mode ran.
    pub max_rel_diff: f64,
}

/// Times forward and backward of each requested mode; reports the best of
/// `repeats` runs.
pub fn layer_bench<T: Scalar>(
    layer: &GnnLayer<T>,
    plan: &GnnPlan<T>,
    x: &DenseMatrix<T>,
    modes: &[FusionMode],
    repeats: usize,
) -> Result<LayerBench> {
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be at least 1".into()));
    }
    let grad_next = DenseMatrix::from_fn(x.rows(), layer.d_out(), |i, j| {
        T::from_f64(((i + 2 * j) % 7) as f64 / 7.0 - 0.5)
    });
    let mut results = Vec::new();
    let mut outputs: Vec<(ForwardOutput<T>, BackwardOutput<T>)> = Vec::new();
    for &mode in modes {
        let mut fwd_best = f64::INFINITY;
        let mut bwd_best = f64::INFINITY;
        let mut last = None;
        for _ in 0..repeats {
            let t0 = Instant::now();
            let f = forward(layer, plan, x, mode)?;
            let t1 = Instant::now();
            let b = backward(layer, plan, &f.z_cache, &grad_next, mode)?;
            let t2 = Instant::now();
            fwd_best = fwd_best.min((t1 - t0).as_secs_f64());
            bwd_best = bwd_best.min((t2 - t1).as_secs_f64());
            last = Some((f, b));
        }
        let (f, b) = last.expect("repeats >= 1");
        results.push(ModeBench {
            mode,
            forward_seconds: fwd_best,
            backward_seconds: bwd_best,
            forward_traffic: f.traffic,
            backward_traffic: b.traffic,
        });
        outputs.push((f, b));
    }
    let mut max_rel_diff: f64 = 0.0;
    if let Some((f0, b0)) = outputs.first() {
        for (f, b) in &outputs[1..] {
            max_rel_diff = max_rel_diff
                .max(f.x_next.max_rel_err(&f0.x_next))
                .max(b.grad_w.max_rel_err(&b0.grad_w))
                .max(b.grad_x.max_rel_err(&b0.grad_x));
        }
    }
    Ok(LayerBench {
        num_vertices: x.rows(),
        d_in: layer.d_in(),
        d_out: layer.d_out(),
        repeats,
        modes: results,
        max_rel_diff,
    })
}
