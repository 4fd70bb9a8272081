use crate::error::{Error, Result};
use crate::matrix::SparseCsr;

/// A graph stored as its adjacency matrix. Neighbor lists are the CSR rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: SparseCsr<f64>,
    undirected: bool,
}

impl Graph {
    /// Wraps an adjacency matrix. When `undirected` is set the matrix must be
    /// structurally symmetric.
    pub fn new(adjacency: SparseCsr<f64>, undirected: bool) -> Result<Self> {
        if !adjacency.is_square() {
            return Err(Error::NotSquare {
                rows: adjacency.num_rows(),
                cols: adjacency.num_cols(),
            });
        }
        if undirected && !adjacency.is_pattern_symmetric() {
            return Err(Error::InvalidArgument(
                "adjacency marked undirected is not symmetric".into(),
            ));
        }
        Ok(Self {
            adjacency,
            undirected,
        })
    }

    /// Wraps a square adjacency, marking it undirected exactly when it is
    /// structurally symmetric.
    pub fn from_adjacency(adjacency: SparseCsr<f64>) -> Result<Self> {
        let undirected = adjacency.is_pattern_symmetric();
        Self::new(adjacency, undirected)
    }

    /// Builds a graph from an edge list with unit weights. Duplicate edges
    /// collapse to one; for undirected graphs both directions are inserted.
    pub fn from_edges(num_vertices: usize, edges: &[(usize, usize)], undirected: bool) -> Result<Self> {
        let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(edges.len() * 2);
        for &(u, v) in edges {
            pairs.push((u, v));
            if undirected && u != v {
                pairs.push((v, u));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        let triplets: Vec<(usize, usize, f64)> = pairs.into_iter().map(|(u, v)| (u, v, 1.0)).collect();
        let adjacency = SparseCsr::from_triplets(num_vertices, num_vertices, &triplets)?;
        Ok(Self {
            adjacency,
            undirected,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.adjacency.num_rows()
    }

    pub fn num_entries(&self) -> usize {
        self.adjacency.nnz()
    }

    pub fn adjacency(&self) -> &SparseCsr<f64> {
        &self.adjacency
    }

    pub fn into_adjacency(self) -> SparseCsr<f64> {
        self.adjacency
    }

    pub fn is_undirected(&self) -> bool {
        self.undirected
    }

    /// Sorted neighbor ids of `v`.
    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        self.adjacency.row(v).0
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.adjacency.row_nnz(v)
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.num_vertices()).map(|v| self.degree(v)).collect()
    }
}
