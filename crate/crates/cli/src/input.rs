//! Graph, matrix and dense-operand arguments.
//!
//! A graph argument is either a file path or a generator spec:
//!
//! - `gen:path:N`, `gen:star:N`, `gen:clique:N`
//! - `gen:gnp:N:P`
//! - `gen:block:COMMUNITIES:SIZE:P_IN:P_OUT`
//!
//! Files ending in `.mtx` are read as Matrix Market, anything else as an
//! edge list. Generators draw from `--seed`.

use std::path::Path;

use anyhow::{bail, Context, Result};
use hcspmm_core::generate;
use hcspmm_core::matrix::io::{load_dense_csv, load_edge_list, load_matrix_market};
use hcspmm_core::{DenseMatrix, Graph, SparseCsr};

use crate::InputError;

pub fn is_matrix_market(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("mtx"))
}

fn parse<T: std::str::FromStr>(spec: &str, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| InputError(format!("generator '{spec}': cannot parse '{s}'")).into())
}

fn generated(spec: &str, seed: u64) -> Result<Graph> {
    let parts: Vec<&str> = spec.split(':').collect();
    let g = match parts.as_slice() {
        ["gen", "path", n] => generate::path(parse(spec, n)?),
        ["gen", "star", n] => generate::star(parse(spec, n)?),
        ["gen", "clique", n] => generate::clique(parse(spec, n)?),
        ["gen", "gnp", n, p] => generate::gnp(parse(spec, n)?, probability(spec, p)?, seed),
        ["gen", "block", c, s, pin, pout] => generate::block_community(
            parse(spec, c)?,
            parse(spec, s)?,
            probability(spec, pin)?,
            probability(spec, pout)?,
            seed,
        ),
        _ => bail!(InputError(format!(
            "unknown generator '{spec}' (expected gen:path:N, gen:star:N, gen:clique:N, gen:gnp:N:P or gen:block:C:S:PIN:POUT)"
        ))),
    };
    Ok(g)
}

fn probability(spec: &str, s: &str) -> Result<f64> {
    let p: f64 = parse(spec, s)?;
    if !(0.0..=1.0).contains(&p) {
        bail!(InputError(format!("generator '{spec}': probability {p} outside [0, 1]")));
    }
    Ok(p)
}

/// Loads a graph. Edge lists are read as undirected unless `directed`.
pub fn load_graph(arg: &str, directed: bool, seed: u64) -> Result<Graph> {
    if arg.starts_with("gen:") {
        return generated(arg, seed);
    }
    let path = Path::new(arg);
    if is_matrix_market(path) {
        let a = load_matrix_market(path)?;
        Ok(Graph::from_adjacency(a).with_context(|| format!("{arg} is not a square adjacency matrix"))?)
    } else {
        Ok(load_edge_list(path, !directed)?.graph)
    }
}

/// Any sparse operand: a Matrix Market file (possibly rectangular) or a
/// graph argument.
pub fn load_matrix(arg: &str, seed: u64) -> Result<SparseCsr<f64>> {
    if !arg.starts_with("gen:") && is_matrix_market(Path::new(arg)) {
        return Ok(load_matrix_market(arg)?);
    }
    Ok(load_graph(arg, false, seed)?.into_adjacency())
}

/// `random:dim=D[,seed=S]` or a headerless CSV path.
pub fn load_dense(arg: &str, rows: usize, default_seed: u64) -> Result<DenseMatrix<f64>> {
    if let Some(rest) = arg.strip_prefix("random:") {
        let mut dim = None;
        let mut seed = default_seed;
        for kv in rest.split(',').filter(|s| !s.is_empty()) {
            match kv.split_once('=') {
                Some(("dim", v)) => dim = Some(v.parse::<usize>().map_err(|_| bad_dense(arg))?),
                Some(("seed", v)) => seed = v.parse().map_err(|_| bad_dense(arg))?,
                _ => return Err(bad_dense(arg)),
            }
        }
        let dim = dim.ok_or_else(|| bad_dense(arg))?;
        return Ok(DenseMatrix::random(rows, dim, seed));
    }
    let x = load_dense_csv(arg)?;
    if x.rows() != rows {
        bail!(InputError(format!("{arg} has {} rows, the sparse matrix has {rows} columns", x.rows())));
    }
    Ok(x)
}

fn bad_dense(arg: &str) -> anyhow::Error {
    InputError(format!("dense operand '{arg}': expected random:dim=D[,seed=S] or a CSV path")).into()
}
