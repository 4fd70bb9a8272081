//! SpMM executors with one numeric contract.
//!
//! - [`spmm_scalar`] walks CSR rows and skips zeros, one output element at a
//!   time.
//! - [`spmm_tile`] walks each window's condensed columns in 16x8 blocks,
//!   materializes the dense block (zeros included) and multiplies it by the
//!   gathered 8 x dim slice of `X`, 16 output columns at a time.
//! - [`spmm_hybrid`] runs every window on the path named by an
//!   [`Assignment`]. Windows own disjoint output rows, so nothing is merged.
//!
//! Every output element is accumulated in ascending column order starting
//! from zero on both paths, so results are reproducible run to run and the
//! paths agree exactly whenever `X` is finite.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, SparseCsr};
use crate::scalar::Scalar;
use crate::window::{partition, RowWindow, TILE_COLS, WINDOW_HEIGHT};

/// Output columns per tile multiply.
pub const DIM_TILE: usize = 16;

const TILE_ROWS: usize = WINDOW_HEIGHT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecPath {
    /// Per-entry CSR traversal.
    Scalar,
    /// Fixed 16x8 dense tiles over condensed columns.
    Tile,
}

impl ExecPath {
    pub fn as_str(self) -> &'static str {
        match self {
            ExecPath::Scalar => "scalar",
            ExecPath::Tile => "tile",
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            ExecPath::Scalar => ExecPath::Tile,
            ExecPath::Tile => ExecPath::Scalar,
        }
    }
}

/// One path per window, indexed by window id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment(pub Vec<ExecPath>);

impl Assignment {
    pub fn uniform(len: usize, path: ExecPath) -> Self {
        Self(vec![path; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self, path: ExecPath) -> usize {
        self.0.iter().filter(|&&p| p == path).count()
    }

    pub fn paths(&self) -> &[ExecPath] {
        &self.0
    }
}

/// A square or rectangular matrix split into row windows of one height.
#[derive(Debug, Clone)]
pub struct WindowedMatrix<T = f64> {
    num_rows: usize,
    num_cols: usize,
    height: usize,
    windows: Vec<RowWindow<T>>,
}

impl<T: Scalar> WindowedMatrix<T> {
    pub fn new(csr: &SparseCsr<T>, height: usize) -> Result<Self> {
        Ok(Self {
            num_rows: csr.num_rows(),
            num_cols: csr.num_cols(),
            height,
            windows: partition(csr, height)?,
        })
    }

    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    pub fn num_cols(&self) -> usize {
        self.num_cols
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn windows(&self) -> &[RowWindow<T>] {
        &self.windows
    }

    pub fn nnz(&self) -> usize {
        self.windows.iter().map(RowWindow::nnz).sum()
    }

    fn check_dense(&self, x: &DenseMatrix<T>) -> Result<()> {
        if x.rows() != self.num_cols {
            return Err(Error::DimensionMismatch(format!(
                "sparse matrix has {} columns, dense matrix has {} rows",
                self.num_cols,
                x.rows()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathStats {
    pub windows_scalar: usize,
    pub windows_tile: usize,
    /// Stored entries multiplied by the scalar path.
    pub entries_scalar: usize,
    /// Stored entries covered by tile-path windows.
    pub entries_tile: usize,
    /// 16x8 blocks processed by the tile path.
    pub tiles: usize,
    /// Windows without entries; no path runs them.
    pub windows_empty: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpmmResult<T = f64> {
    pub z: DenseMatrix<T>,
    pub stats: PathStats,
}

/// Row-by-row CSR product, `Z[i, :] = sum_k values[k] * X[col_idx[k], :]`
/// with `k` ascending.
pub fn spmm_scalar<T: Scalar>(csr: &SparseCsr<T>, x: &DenseMatrix<T>) -> Result<SpmmResult<T>> {
    if csr.num_cols() != x.rows() {
        return Err(Error::DimensionMismatch(format!(
            "sparse matrix has {} columns, dense matrix has {} rows",
            csr.num_cols(),
            x.rows()
        )));
    }
    let dim = x.dim();
    let mut z = DenseMatrix::zeros(csr.num_rows(), dim);
    if dim > 0 {
        z.data_mut().par_chunks_mut(dim).enumerate().for_each(|(i, out)| {
            let (cols, vals) = csr.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                for (o, &xv) in out.iter_mut().zip(x.row(c)) {
                    *o = *o + v * xv;
                }
            }
        });
    }
    let mut stats = PathStats {
        entries_scalar: csr.nnz(),
        ..PathStats::default()
    };
    for start in (0..csr.num_rows()).step_by(WINDOW_HEIGHT) {
        let end = (start + WINDOW_HEIGHT).min(csr.num_rows());
        if csr.row_ptr()[end] > csr.row_ptr()[start] {
            stats.windows_scalar += 1;
        } else {
            stats.windows_empty += 1;
        }
    }
    Ok(SpmmResult { z, stats })
}

/// Tile-path product over every window.
pub fn spmm_tile<T: Scalar>(m: &WindowedMatrix<T>, x: &DenseMatrix<T>) -> Result<SpmmResult<T>> {
    let all = Assignment::uniform(m.windows.len(), ExecPath::Tile);
    spmm_hybrid(m, &all, x)
}

/// Runs window `i` on `assignment[i]`. Empty windows are skipped.
pub fn spmm_hybrid<T: Scalar>(
    m: &WindowedMatrix<T>,
    assignment: &Assignment,
    x: &DenseMatrix<T>,
) -> Result<SpmmResult<T>> {
    if assignment.len() != m.windows.len() {
        return Err(Error::DimensionMismatch(format!(
            "assignment has {} entries for {} windows",
            assignment.len(),
            m.windows.len()
        )));
    }
    m.check_dense(x)?;
    if m.height > TILE_ROWS && assignment.0.contains(&ExecPath::Tile) {
        return Err(Error::InvalidArgument(format!(
            "tile path needs windows of at most {TILE_ROWS} rows, got {}",
            m.height
        )));
    }
    let dim = x.dim();
    let mut z = DenseMatrix::zeros(m.num_rows, dim);
    if dim > 0 && m.num_rows > 0 {
        z.data_mut()
            .par_chunks_mut(m.height * dim)
            .zip(m.windows.par_iter())
            .zip(assignment.0.par_iter())
            .for_each_init(
                || TileScratch::new(dim),
                |scratch, ((out, w), &path)| {
                    run_window(w, path, x, out, scratch);
                },
            );
    }

    let mut stats = PathStats::default();
    for (w, &path) in m.windows.iter().zip(&assignment.0) {
        if w.is_empty() {
            stats.windows_empty += 1;
            continue;
        }
        match path {
            ExecPath::Scalar => {
                stats.windows_scalar += 1;
                stats.entries_scalar += w.nnz();
            }
            ExecPath::Tile => {
                stats.windows_tile += 1;
                stats.entries_tile += w.nnz();
                stats.tiles += w.tile_count(TILE_COLS);
            }
        }
    }
    Ok(SpmmResult { z, stats })
}

/// Computes one window into `out` (its `row_count x dim` output rows, zeroed).
pub fn run_window<T: Scalar>(
    w: &RowWindow<T>,
    path: ExecPath,
    x: &DenseMatrix<T>,
    out: &mut [T],
    scratch: &mut TileScratch<T>,
) {
    if w.is_empty() {
        return;
    }
    match path {
        ExecPath::Scalar => scalar_window(w, x, out),
        ExecPath::Tile => tile_window(w, x, out, scratch),
    }
}

fn scalar_window<T: Scalar>(w: &RowWindow<T>, x: &DenseMatrix<T>, out: &mut [T]) {
    let dim = x.dim();
    let cols = w.nonzero_cols();
    for r in 0..w.row_count() {
        let orow = &mut out[r * dim..(r + 1) * dim];
        let (cc, vals) = w.row_entries(r);
        for (&c, &v) in cc.iter().zip(vals) {
            for (o, &xv) in orow.iter_mut().zip(x.row(cols[c as usize])) {
                *o = *o + v * xv;
            }
        }
    }
}

/// Staging buffers for one 16x8 block of the window and the matching 8 rows
/// of `X`.
#[derive(Debug, Clone)]
pub struct TileScratch<T> {
    tile: [T; TILE_ROWS * TILE_COLS],
    xblock: Vec<T>,
    cursor: [usize; TILE_ROWS],
}

impl<T: Scalar> TileScratch<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            tile: [T::zero(); TILE_ROWS * TILE_COLS],
            xblock: vec![T::zero(); TILE_COLS * dim],
            cursor: [0; TILE_ROWS],
        }
    }
}

fn tile_window<T: Scalar>(w: &RowWindow<T>, x: &DenseMatrix<T>, out: &mut [T], s: &mut TileScratch<T>) {
    let dim = x.dim();
    let cols = w.nonzero_cols();
    let rows = w.row_count();
    if s.xblock.len() != TILE_COLS * dim {
        s.xblock = vec![T::zero(); TILE_COLS * dim];
    }
    s.cursor = [0; TILE_ROWS];

    for block in 0..w.tile_count(TILE_COLS) {
        let first = block * TILE_COLS;
        let last = first + TILE_COLS;

        // dense 16x8 block of the window, zero where nothing is stored
        s.tile.fill(T::zero());
        for r in 0..rows {
            let (cc, vals) = w.row_entries(r);
            let mut k = s.cursor[r];
            while k < cc.len() && (cc[k] as usize) < last {
                s.tile[r * TILE_COLS + cc[k] as usize - first] = vals[k];
                k += 1;
            }
            s.cursor[r] = k;
        }

        // 8 x dim slice of X; condensed columns past ncols stay zero
        for c in 0..TILE_COLS {
            let dst = &mut s.xblock[c * dim..(c + 1) * dim];
            match cols.get(first + c) {
                Some(&src) => dst.copy_from_slice(x.row(src)),
                None => dst.fill(T::zero()),
            }
        }

        for j0 in (0..dim).step_by(DIM_TILE) {
            let j1 = (j0 + DIM_TILE).min(dim);
            for r in 0..rows {
                let arow = &s.tile[r * TILE_COLS..(r + 1) * TILE_COLS];
                for j in j0..j1 {
                    let mut acc = out[r * dim + j];
                    for (c, &a) in arow.iter().enumerate() {
                        acc = acc + a * s.xblock[c * dim + j];
                    }
                    out[r * dim + j] = acc;
                }
            }
        }
    }
}
