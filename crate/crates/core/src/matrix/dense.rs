use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix, `rows x dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T = f64> {
    rows: usize,
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            rows,
            dim,
            data: vec![T::zero(); rows * dim],
        }
    }

    pub fn from_vec(rows: usize, dim: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::DimensionMismatch(format!(
                "dense data has {} values, expected {rows}x{dim}",
                data.len()
            )));
        }
        Ok(Self { rows, dim, data })
    }

    pub fn from_fn(rows: usize, dim: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * dim);
        for i in 0..rows {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { rows, dim, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    /// Entries drawn uniformly from `[-1, 1)` with a seeded ChaCha8 stream.
    /// The stream is generated in `f64` so both precisions see the same
    /// values up to rounding.
    pub fn random(rows: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * dim)
            .map(|_| T::from_f64(rng.gen_range(-1.0..1.0)))
            .collect();
        Self { rows, dim, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.dim + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, self.rows, |i, j| self.get(j, i))
    }

    /// `self * rhs`, inner dimension summed in ascending order.
    pub fn matmul(&self, rhs: &DenseMatrix<T>) -> Result<Self> {
        if self.dim != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.dim, rhs.rows, rhs.dim
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.dim);
        for i in 0..self.rows {
            gemm_row(self.row(i), rhs, out.row_mut(i));
        }
        Ok(out)
    }

    /// `self^T * rhs` without materializing the transpose.
    pub fn transpose_matmul(&self, rhs: &DenseMatrix<T>) -> Result<Self> {
        if self.rows != rhs.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply ({}x{})^T by {}x{}",
                self.rows, self.dim, rhs.rows, rhs.dim
            )));
        }
        let mut out = Self::zeros(self.dim, rhs.dim);
        for k in 0..self.rows {
            let a = self.row(k);
            let b = rhs.row(k);
            for (i, &aik) in a.iter().enumerate() {
                let orow = out.row_mut(i);
                for (o, &bk) in orow.iter_mut().zip(b) {
                    *o = *o + aik * bk;
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&self, alpha: T) -> Self {
        Self {
            rows: self.rows,
            dim: self.dim,
            data: self.data.iter().map(|&v| v * alpha).collect(),
        }
    }

    /// Copy with row `i` of the result taken from row `src[i]` of `self`.
    pub fn gather_rows(&self, src: &[usize]) -> Self {
        let mut out = Self::zeros(src.len(), self.dim);
        for (i, &s) in src.iter().enumerate() {
            out.row_mut(i).copy_from_slice(self.row(s));
        }
        out
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix<T>) -> T {
        assert_eq!((self.rows, self.dim), (other.rows, other.dim));
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    /// Normwise relative error against `reference`:
    /// `max|self - reference| / max|reference|` (0 when both are zero).
    pub fn max_rel_err(&self, reference: &DenseMatrix<T>) -> f64 {
        let diff = self.max_abs_diff(reference).to_f64();
        let scale = reference.max_abs().to_f64();
        if scale == 0.0 {
            diff
        } else {
            diff / scale
        }
    }

    pub fn cast<U: Scalar>(&self) -> DenseMatrix<U> {
        DenseMatrix {
            rows: self.rows,
            dim: self.dim,
            data: self.data.iter().map(|&v| U::from_f64(v.to_f64())).collect(),
        }
    }
}

/// `out += a_row * b`, inner index ascending.
#[inline]
pub(crate) fn gemm_row<T: Scalar>(a_row: &[T], b: &DenseMatrix<T>, out: &mut [T]) {
    for (k, &a) in a_row.iter().enumerate() {
        let brow = b.row(k);
        for (o, &bv) in out.iter_mut().zip(brow) {
            *o = *o + a * bv;
        }
    }
}
