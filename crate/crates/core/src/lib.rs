//! Hybrid scalar/tile sparse-dense matrix multiplication on row windows.
//!
//! The crate covers the whole decision pipeline:
//!
//! - [`matrix`]: CSR and dense matrices, graphs, Matrix Market / edge-list IO
//!   and symmetric permutation.
//! - [`window`]: 16-row windows with condensed non-zero columns and their
//!   features (density, non-zero columns, computing intensity).
//! - [`select`]: synthetic window generation, label collection, a logistic
//!   regression selector and its JSON encoding.
//! - [`exec`]: the scalar CSR executor, the 16x8 tile executor and the
//!   hybrid dispatcher.
//! - [`perf`]: the analytic per-window cost model, its calibration and the
//!   timing providers used to label training data.
//! - [`loa`]: greedy layout reorganization grouping vertices into dense
//!   windows, in a brute-force and an incremental variant.
//! - [`gnn`]: a single GCN/GIN-style layer with fused and unfused
//!   aggregation/update and memory-traffic accounting.
//! - [`generate`]: seeded synthetic graphs used by tests and benchmarks.

pub mod error;
pub mod exec;
pub mod generate;
pub mod gnn;
pub mod loa;
pub mod matrix;
pub mod perf;
pub mod scalar;
pub mod select;
pub mod window;

pub use error::{Error, Result};
pub use exec::{spmm_hybrid, spmm_scalar, spmm_tile, ExecPath, PathStats, SpmmResult};
pub use matrix::{permute_symmetric, spmm_dense_oracle, DenseMatrix, Graph, Permutation, SparseCsr};
pub use scalar::Scalar;
pub use window::{partition, RowWindow, WindowFeatures, WINDOW_HEIGHT};
