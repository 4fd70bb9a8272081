use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Compressed-sparse-row matrix.
///
/// Invariants, checked by [`SparseCsr::validate`] on every construction path:
/// `row_ptr` starts at 0, is non-decreasing and ends at `nnz`; column indices
/// are strictly ascending within each row and below `num_cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCsr<T = f64> {
    num_rows: usize,
    num_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> SparseCsr<T> {
    /// Builds a matrix from raw CSR arrays, rejecting anything that violates
    /// the structural invariants.
    pub fn from_parts(
        num_rows: usize,
        num_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<T>,
    ) -> Result<Self> {
        let csr = Self {
            num_rows,
            num_cols,
            row_ptr,
            col_idx,
            values,
        };
        csr.validate()?;
        Ok(csr)
    }

    /// Builds a matrix from `(row, col, value)` triples in any order.
    /// Duplicate coordinates are summed.
    pub fn from_triplets(
        num_rows: usize,
        num_cols: usize,
        triplets: &[(usize, usize, T)],
    ) -> Result<Self> {
        let mut counts = vec![0usize; num_rows + 1];
        for &(r, c, _) in triplets {
            if r >= num_rows || c >= num_cols {
                return Err(Error::IndexOutOfBounds {
                    row: r,
                    col: c,
                    rows: num_rows,
                    cols: num_cols,
                });
            }
            counts[r + 1] += 1;
        }
        for i in 0..num_rows {
            counts[i + 1] += counts[i];
        }
        let mut cursor = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![T::zero(); triplets.len()];
        for &(r, c, v) in triplets {
            cols[cursor[r]] = c;
            vals[cursor[r]] = v;
            cursor[r] += 1;
        }

        let mut row_ptr = Vec::with_capacity(num_rows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut row: Vec<(usize, T)> = Vec::new();
        for i in 0..num_rows {
            row.clear();
            row.extend((counts[i]..counts[i + 1]).map(|k| (cols[k], vals[k])));
            // stable sort keeps duplicates in input order so sums are reproducible
            row.sort_by_key(|&(c, _)| c);
            for &(c, v) in &row {
                if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == c {
                    let last = values.last_mut().unwrap();
                    *last = *last + v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self::from_parts(num_rows, num_cols, row_ptr, col_idx, values)
    }

    /// The `n x n` identity.
    pub fn identity(n: usize) -> Self {
        Self {
            num_rows: n,
            num_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    /// A matrix with no stored entries.
    pub fn zeros(num_rows: usize, num_cols: usize) -> Self {
        Self {
            num_rows,
            num_cols,
            row_ptr: vec![0; num_rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidCsr(msg));
        if self.row_ptr.len() != self.num_rows + 1 {
            return bad(format!(
                "row_ptr has length {}, expected {}",
                self.row_ptr.len(),
                self.num_rows + 1
            ));
        }
        if self.row_ptr[0] != 0 {
            return bad(format!("row_ptr[0] = {}", self.row_ptr[0]));
        }
        if self.col_idx.len() != self.values.len() {
            return bad(format!(
                "{} column indices but {} values",
                self.col_idx.len(),
                self.values.len()
            ));
        }
        if self.row_ptr[self.num_rows] != self.col_idx.len() {
            return bad(format!(
                "row_ptr ends at {} but nnz = {}",
                self.row_ptr[self.num_rows],
                self.col_idx.len()
            ));
        }
        for i in 0..self.num_rows {
            let (start, end) = (self.row_ptr[i], self.row_ptr[i + 1]);
            if start > end {
                return bad(format!("row_ptr decreases at row {i}"));
            }
            let cols = &self.col_idx[start..end];
            for (k, &c) in cols.iter().enumerate() {
                if c >= self.num_cols {
                    return bad(format!(
                        "row {i}: column {c} >= num_cols {}",
                        self.num_cols
                    ));
                }
                if k > 0 && cols[k - 1] >= c {
                    return bad(format!("row {i}: columns not strictly ascending"));
                }
            }
        }
        Ok(())
    }

    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    pub fn num_cols(&self) -> usize {
        self.num_cols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn is_square(&self) -> bool {
        self.num_rows == self.num_cols
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    #[inline]
    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    /// Stored value at `(i, j)`, if any.
    pub fn get(&self, i: usize, j: usize) -> Option<T> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).ok().map(|k| vals[k])
    }

    /// All stored entries as `(row, col, value)` in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.num_rows {
            let (cols, vals) = self.row(i);
            out.extend(cols.iter().zip(vals).map(|(&c, &v)| (i, c, v)));
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut t: Vec<(usize, usize, T)> = self.triplets();
        for e in &mut t {
            std::mem::swap(&mut e.0, &mut e.1);
        }
        Self::from_triplets(self.num_cols, self.num_rows, &t)
            .expect("transpose of a valid matrix is valid")
    }

    /// Structural and numeric symmetry: `(i, j, v)` stored iff `(j, i, v)` is.
    pub fn is_symmetric(&self) -> bool {
        self.is_square() && *self == self.transpose()
    }

    /// Structural symmetry only.
    pub fn is_pattern_symmetric(&self) -> bool {
        if !self.is_square() {
            return false;
        }
        let t = self.transpose();
        self.row_ptr == t.row_ptr && self.col_idx == t.col_idx
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<T> {
        let mut d = vec![T::zero(); self.num_rows * self.num_cols];
        for i in 0..self.num_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                d[i * self.num_cols + c] = v;
            }
        }
        d
    }

    pub fn map_values<U: Scalar>(&self, f: impl Fn(T) -> U) -> SparseCsr<U> {
        SparseCsr {
            num_rows: self.num_rows,
            num_cols: self.num_cols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Same pattern, each value replaced by `f(row, col, value)`.
    pub fn map_indexed(&self, f: impl Fn(usize, usize, T) -> T) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for i in 0..self.num_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                values.push(f(i, self.col_idx[k], self.values[k]));
            }
        }
        SparseCsr {
            values,
            ..self.clone()
        }
    }

    pub fn cast<U: Scalar>(&self) -> SparseCsr<U> {
        self.map_values(|v| U::from_f64(v.to_f64()))
    }
}
