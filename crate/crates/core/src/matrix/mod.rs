//! Sparse and dense matrix substrate.

mod csr;
mod dense;
mod graph;
pub mod io;
mod perm;

pub use csr::SparseCsr;
pub use dense::DenseMatrix;
pub(crate) use dense::gemm_row;
pub use graph::Graph;
pub use io::{load_edge_list, load_matrix_market, write_matrix_market, EdgeList};
pub use perm::{permute_symmetric, Permutation};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Reference product of the densified `csr` with `x`, by the plain triple
/// loop. Every stored and unstored element takes part, so it shares no code
/// path with the sparse executors.
pub fn spmm_dense_oracle<T: Scalar>(csr: &SparseCsr<T>, x: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    if csr.num_cols() != x.rows() {
        return Err(Error::DimensionMismatch(format!(
            "sparse matrix has {} columns, dense matrix has {} rows",
            csr.num_cols(),
            x.rows()
        )));
    }
    let a = csr.to_dense();
    let (n, m, dim) = (csr.num_rows(), csr.num_cols(), x.dim());
    let mut z = DenseMatrix::zeros(n, dim);
    for i in 0..n {
        let out = z.row_mut(i);
        for k in 0..m {
            let aik = a[i * m + k];
            for (o, &xv) in out.iter_mut().zip(x.row(k)) {
                *o = *o + aik * xv;
            }
        }
    }
    Ok(z)
}
