//! Row windows: fixed-height horizontal slices of a sparse matrix whose
//! non-zero columns are condensed to the front.
//!
//! A window keeps the ascending list of original column ids that appear in
//! any of its rows (`nonzero_cols`); its entries refer to positions in that
//! list. The tile executor walks the condensed columns in blocks of
//! [`TILE_COLS`], the scalar executor maps them back to original ids.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::SparseCsr;
use crate::scalar::Scalar;

/// Rows per window, fixed by the 16x8x16 tile shape.
pub const WINDOW_HEIGHT: usize = 16;
/// Condensed columns per tile.
pub const TILE_COLS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct RowWindow<T = f64> {
    window_id: usize,
    row_start: usize,
    row_count: usize,
    nonzero_cols: Vec<usize>,
    /// Local row pointer into `cond_cols`/`values`, length `row_count + 1`.
    row_ptr: Vec<usize>,
    cond_cols: Vec<u32>,
    values: Vec<T>,
}

impl<T: Scalar> RowWindow<T> {
    fn from_rows(csr: &SparseCsr<T>, window_id: usize, row_start: usize, row_count: usize) -> Self {
        let lo = csr.row_ptr()[row_start];
        let hi = csr.row_ptr()[row_start + row_count];
        let mut nonzero_cols = csr.col_idx()[lo..hi].to_vec();
        nonzero_cols.sort_unstable();
        nonzero_cols.dedup();

        let row_ptr = csr.row_ptr()[row_start..=row_start + row_count]
            .iter()
            .map(|&p| p - lo)
            .collect();
        let cond_cols = csr.col_idx()[lo..hi]
            .iter()
            .map(|c| nonzero_cols.binary_search(c).expect("column collected above") as u32)
            .collect();
        Self {
            window_id,
            row_start,
            row_count,
            nonzero_cols,
            row_ptr,
            cond_cols,
            values: csr.values()[lo..hi].to_vec(),
        }
    }

    pub fn window_id(&self) -> usize {
        self.window_id
    }

    pub fn row_start(&self) -> usize {
        self.row_start
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn rows(&self) -> std::ops::Range<usize> {
        self.row_start..self.row_start + self.row_count
    }

    /// Original column ids present in the window, ascending.
    pub fn nonzero_cols(&self) -> &[usize] {
        &self.nonzero_cols
    }

    pub fn ncols(&self) -> usize {
        self.nonzero_cols.len()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Condensed column positions and values of local row `r`.
    #[inline]
    pub fn row_entries(&self, r: usize) -> (&[u32], &[T]) {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.cond_cols[range.clone()], &self.values[range])
    }

    /// `(global row, original column, value)` for every entry.
    pub fn decondense(&self) -> Vec<(usize, usize, T)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.row_count {
            let (cols, vals) = self.row_entries(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out.push((self.row_start + r, self.nonzero_cols[c as usize], v));
            }
        }
        out
    }

    pub fn features(&self) -> WindowFeatures {
        WindowFeatures::from_counts(self.nnz(), self.ncols(), self.row_count)
    }

    /// Number of condensed `16 x tile_cols` blocks the tile path visits.
    pub fn tile_count(&self, tile_cols: usize) -> usize {
        assert!(tile_cols >= 1, "tile_cols must be positive");
        self.ncols().div_ceil(tile_cols)
    }
}

/// Splits a matrix into `ceil(num_rows / height)` windows in row order.
pub fn partition<T: Scalar>(csr: &SparseCsr<T>, height: usize) -> Result<Vec<RowWindow<T>>> {
    if height == 0 {
        return Err(Error::InvalidArgument("window height must be at least 1".into()));
    }
    csr.validate()?;
    let n = csr.num_rows();
    let count = n.div_ceil(height);
    Ok((0..count)
        .into_par_iter()
        .map(|w| {
            let start = w * height;
            RowWindow::from_rows(csr, w, start, height.min(n - start))
        })
        .collect())
}

/// Classifier and cost-model inputs of one window.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WindowFeatures {
    pub nnz: usize,
    pub ncols: usize,
    pub row_count: usize,
    /// `nnz / (row_count * ncols)`, the non-zero fraction of the condensed
    /// window; 0 for an empty window.
    pub density: f64,
    /// `nnz / ncols`; 0 for an empty window.
    pub computing_intensity: f64,
}

impl WindowFeatures {
    pub fn from_counts(nnz: usize, ncols: usize, row_count: usize) -> Self {
        let (density, computing_intensity) = if ncols == 0 || row_count == 0 {
            (0.0, 0.0)
        } else {
            (
                nnz as f64 / (row_count * ncols) as f64,
                nnz as f64 / ncols as f64,
            )
        };
        Self {
            nnz,
            ncols,
            row_count,
            density,
            computing_intensity,
        }
    }

    /// Complement of density, the convention some plots use for "sparsity".
    pub fn sparsity(&self) -> f64 {
        1.0 - self.density
    }
}

pub fn features<T: Scalar>(w: &RowWindow<T>) -> WindowFeatures {
    w.features()
}

pub fn tile_count<T: Scalar>(w: &RowWindow<T>, tile_cols: usize) -> usize {
    w.tile_count(tile_cols)
}

/// Per-window CSV: `window_id,nnz,ncols,density,computing_intensity`.
pub fn write_partition_csv<T: Scalar, W: Write>(windows: &[RowWindow<T>], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "window_id,nnz,ncols,density,computing_intensity")?;
    for win in windows {
        let f = win.features();
        writeln!(
            w,
            "{},{},{},{},{}",
            win.window_id(),
            f.nnz,
            f.ncols,
            f.density,
            f.computing_intensity
        )?;
    }
    Ok(())
}

pub fn save_partition_csv<T: Scalar>(windows: &[RowWindow<T>], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    write_partition_csv(windows, &mut file)
        .and_then(|_| file.flush())
        .map_err(|e| Error::io(path, e))
}
