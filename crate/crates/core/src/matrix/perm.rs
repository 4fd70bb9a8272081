use crate::error::{Error, Result};
use crate::matrix::SparseCsr;
use crate::scalar::Scalar;

/// A bijection on `0..n`, stored as old id -> new id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    old_to_new: Vec<usize>,
}

impl Permutation {
    pub fn new(old_to_new: Vec<usize>) -> Result<Self> {
        let n = old_to_new.len();
        let mut seen = vec![false; n];
        for (old, &new) in old_to_new.iter().enumerate() {
            if new >= n {
                return Err(Error::InvalidPermutation(format!(
                    "vertex {old} maps to {new}, outside 0..{n}"
                )));
            }
            if std::mem::replace(&mut seen[new], true) {
                return Err(Error::InvalidPermutation(format!(
                    "target {new} is hit twice"
                )));
            }
        }
        Ok(Self { old_to_new })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            old_to_new: (0..n).collect(),
        }
    }

    /// The permutation sending `order[k]` to `k`.
    pub fn from_order(order: &[usize]) -> Result<Self> {
        let n = order.len();
        let mut old_to_new = vec![usize::MAX; n];
        for (new, &old) in order.iter().enumerate() {
            if old >= n || old_to_new[old] != usize::MAX {
                return Err(Error::InvalidPermutation(format!(
                    "order entry {old} at position {new} is out of range or repeated"
                )));
            }
            old_to_new[old] = new;
        }
        Ok(Self { old_to_new })
    }

    pub fn len(&self) -> usize {
        self.old_to_new.len()
    }

    pub fn is_empty(&self) -> bool {
        self.old_to_new.is_empty()
    }

    #[inline]
    pub fn apply(&self, old: usize) -> usize {
        self.old_to_new[old]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.old_to_new
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (old, &new) in self.old_to_new.iter().enumerate() {
            inv[new] = old;
        }
        Self { old_to_new: inv }
    }
}

/// Relabels rows and columns together: entry `(i, j)` of the input lands at
/// `(perm(i), perm(j))`.
pub fn permute_symmetric<T: Scalar>(csr: &SparseCsr<T>, perm: &Permutation) -> Result<SparseCsr<T>> {
    if !csr.is_square() {
        return Err(Error::NotSquare {
            rows: csr.num_rows(),
            cols: csr.num_cols(),
        });
    }
    if perm.len() != csr.num_rows() {
        return Err(Error::InvalidPermutation(format!(
            "permutation of length {} applied to {} rows",
            perm.len(),
            csr.num_rows()
        )));
    }
    let n = csr.num_rows();
    let inv = perm.inverse();
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(csr.nnz());
    let mut values = Vec::with_capacity(csr.nnz());
    let mut row: Vec<(usize, T)> = Vec::new();
    row_ptr.push(0);
    for new_i in 0..n {
        let (cols, vals) = csr.row(inv.apply(new_i));
        row.clear();
        row.extend(cols.iter().zip(vals).map(|(&c, &v)| (perm.apply(c), v)));
        row.sort_unstable_by_key(|&(c, _)| c);
        for &(c, v) in &row {
            col_idx.push(c);
            values.push(v);
        }
        row_ptr.push(col_idx.len());
    }
    SparseCsr::from_parts(n, n, row_ptr, col_idx, values)
}
