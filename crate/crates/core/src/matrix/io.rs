//! Matrix Market, edge-list and dense CSV readers and writers.
//!
//! Indices are 1-based in Matrix Market files and 0-based everywhere else.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, Graph, SparseCsr};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MmField {
    Real,
    Integer,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MmSymmetry {
    General,
    Symmetric,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Reads a Matrix Market coordinate file. Symmetric files are expanded to
/// both triangles, pattern entries get value 1 and duplicates are summed.
pub fn load_matrix_market(path: impl AsRef<Path>) -> Result<SparseCsr<f64>> {
    let path = path.as_ref();
    read_matrix_market(open(path)?).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_matrix_market<R: Read>(reader: R) -> Result<SparseCsr<f64>> {
    let mut lines = BufReader::new(reader).lines().enumerate();
    let mut next_line = || -> Result<Option<(usize, String)>> {
        match lines.next() {
            None => Ok(None),
            Some((i, line)) => line
                .map(|l| Some((i + 1, l)))
                .map_err(|e| Error::io("<matrix market>", e)),
        }
    };

    let (lineno, header) = next_line()?.ok_or_else(|| Error::parse(1, "empty file"))?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(Error::parse(lineno, "expected '%%MatrixMarket matrix ...' header"));
    }
    if tokens[2] != "coordinate" {
        return Err(Error::parse(lineno, format!("unsupported format '{}'", tokens[2])));
    }
    let field = match tokens[3].as_str() {
        "real" | "double" => MmField::Real,
        "integer" => MmField::Integer,
        "pattern" => MmField::Pattern,
        other => return Err(Error::parse(lineno, format!("unsupported field '{other}'"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => MmSymmetry::General,
        "symmetric" => MmSymmetry::Symmetric,
        other => return Err(Error::parse(lineno, format!("unsupported symmetry '{other}'"))),
    };

    let (size_line, size) = loop {
        let (n, l) = next_line()?.ok_or_else(|| Error::parse(lineno + 1, "missing size line"))?;
        let t = l.trim();
        if !t.is_empty() && !t.starts_with('%') {
            break (n, t.to_string());
        }
    };
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse(size_line, format!("bad size line: {e}")))?;
    if dims.len() != 3 {
        return Err(Error::parse(size_line, "size line needs rows, cols and entry count"));
    }
    let (rows, cols, declared) = (dims[0], dims[1], dims[2]);
    if symmetry == MmSymmetry::Symmetric && rows != cols {
        return Err(Error::parse(size_line, "symmetric matrix must be square"));
    }

    let mut triplets = Vec::with_capacity(declared * 2);
    let mut seen = 0usize;
    let mut last_line = size_line;
    while let Some((n, l)) = next_line()? {
        last_line = n;
        let t = l.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let mut it = t.split_whitespace();
        let mut index = |what: &str, bound: usize| -> Result<usize> {
            let tok = it
                .next()
                .ok_or_else(|| Error::parse(n, format!("missing {what} index")))?;
            let v: usize = tok
                .parse()
                .map_err(|_| Error::parse(n, format!("bad {what} index '{tok}'")))?;
            if v == 0 || v > bound {
                return Err(Error::parse(
                    n,
                    format!("{what} index {v} outside declared bounds 1..={bound}"),
                ));
            }
            Ok(v - 1)
        };
        let r = index("row", rows)?;
        let c = index("column", cols)?;
        let v = match field {
            MmField::Pattern => 1.0,
            MmField::Real | MmField::Integer => {
                let tok = it.next().ok_or_else(|| Error::parse(n, "missing value"))?;
                tok.parse::<f64>()
                    .map_err(|_| Error::parse(n, format!("bad value '{tok}'")))?
            }
        };
        if it.next().is_some() {
            return Err(Error::parse(n, "trailing tokens after entry"));
        }
        seen += 1;
        if seen > declared {
            return Err(Error::parse(n, format!("more than the declared {declared} entries")));
        }
        triplets.push((r, c, v));
        if symmetry == MmSymmetry::Symmetric && r != c {
            triplets.push((c, r, v));
        }
    }
    if seen != declared {
        return Err(Error::parse(
            last_line,
            format!("expected {declared} entries, found {seen}"),
        ));
    }
    SparseCsr::from_triplets(rows, cols, &triplets)
}

/// Writes `coordinate real general` with shortest round-trip values, so
/// writing a loaded file again reproduces it byte for byte.
pub fn write_matrix_market<T: Scalar>(csr: &SparseCsr<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_matrix_market_to(csr, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_matrix_market_to<T: Scalar, W: Write>(csr: &SparseCsr<T>, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", csr.num_rows(), csr.num_cols(), csr.nnz())?;
    for i in 0..csr.num_rows() {
        let (cols, vals) = csr.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            writeln!(w, "{} {} {}", i + 1, c + 1, v)?;
        }
    }
    Ok(())
}

/// An edge-list graph together with the index base detected in the file.
#[derive(Debug, Clone)]
pub struct EdgeList {
    pub graph: Graph,
    /// True when the smallest id in the file was at least 1 and ids were
    /// shifted down by one.
    pub one_based: bool,
}

/// Reads `src dst` pairs separated by whitespace or commas. Lines starting
/// with `#` or `%` are comments. The index base is 0 if any id is 0 and 1
/// otherwise.
pub fn load_edge_list(path: impl AsRef<Path>, undirected: bool) -> Result<EdgeList> {
    let path = path.as_ref();
    read_edge_list(open(path)?, undirected).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_edge_list<R: Read>(reader: R, undirected: bool) -> Result<EdgeList> {
    let mut raw: Vec<(usize, usize)> = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::io("<edge list>", e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = t
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        if toks.len() != 2 {
            return Err(Error::parse(i + 1, format!("expected 'src dst', got '{t}'")));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::parse(i + 1, format!("non-integer vertex id '{s}'")))
        };
        raw.push((parse(toks[0])?, parse(toks[1])?));
    }
    if raw.is_empty() {
        return Err(Error::parse(0, "edge list contains no edges"));
    }
    let min_id = raw.iter().map(|&(u, v)| u.min(v)).min().unwrap();
    let max_id = raw.iter().map(|&(u, v)| u.max(v)).max().unwrap();
    let one_based = min_id >= 1;
    let shift = usize::from(one_based);
    let edges: Vec<(usize, usize)> = raw.iter().map(|&(u, v)| (u - shift, v - shift)).collect();
    let graph = Graph::from_edges(max_id + 1 - shift, &edges, undirected)?;
    Ok(EdgeList { graph, one_based })
}

/// Reads a headerless CSV of floats, one matrix row per line.
pub fn load_dense_csv(path: impl AsRef<Path>) -> Result<DenseMatrix<f64>> {
    let path = path.as_ref();
    let reader = open(path)?;
    let mut data = Vec::new();
    let mut dim = None;
    let mut rows = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let before = data.len();
        for tok in t.split(',') {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|_| Error::parse(i + 1, format!("bad number '{tok}'")))?;
            data.push(v);
        }
        let width = data.len() - before;
        match dim {
            None => dim = Some(width),
            Some(d) if d != width => {
                return Err(Error::parse(i + 1, format!("row has {width} values, expected {d}")))
            }
            _ => {}
        }
        rows += 1;
    }
    DenseMatrix::from_vec(rows, dim.unwrap_or(0), data)
}

pub fn write_dense_csv<T: Scalar>(m: &DenseMatrix<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res = (|| -> std::io::Result<()> {
        for i in 0..m.rows() {
            let row = m.row(i);
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    w.write_all(b",")?;
                }
                write!(w, "{v}")?;
            }
            w.write_all(b"\n")?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}
