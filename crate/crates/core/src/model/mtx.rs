//! MatrixMarket coordinate files and whitespace-separated sidecar vectors.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::GeneralInstance;
use crate::error::{Error, Result};

const HEADER: &str = "%%MatrixMarket matrix coordinate real general";

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Coordinate-format matrix: dimensions plus 0-based `(row, col, value)`
/// entries. Explicit zeros are dropped; negative values are rejected.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

pub fn read_matrix_market<R: Read>(reader: R) -> Result<CoordMatrix> {
    let reader = BufReader::new(reader);
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let header = header?;
    let fields: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(parse_err(1, "missing %%MatrixMarket matrix header"));
    }
    if fields[2] != "coordinate" {
        return Err(parse_err(1, format!("unsupported format '{}'", fields[2])));
    }
    let pattern = match fields[3].as_str() {
        "real" | "integer" => false,
        "pattern" => true,
        other => return Err(parse_err(1, format!("unsupported field '{other}'"))),
    };
    if fields[4] != "general" {
        return Err(parse_err(1, format!("unsupported symmetry '{}'", fields[4])));
    }

    let mut size: Option<(usize, usize, usize)> = None;
    let mut entries = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let tok: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if tok.len() != 3 {
                    return Err(parse_err(lineno, "expected 'rows cols nnz'"));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|e| parse_err(lineno, e.to_string()));
                size = Some((p(tok[0])?, p(tok[1])?, p(tok[2])?));
                entries.reserve(size.unwrap().2);
            }
            Some((rows, cols, _)) => {
                let want = if pattern { 2 } else { 3 };
                if tok.len() != want {
                    return Err(parse_err(lineno, format!("expected {want} fields")));
                }
                let idx = |s: &str, bound: usize| -> Result<usize> {
                    let k = s.parse::<usize>().map_err(|e| parse_err(lineno, e.to_string()))?;
                    if k == 0 || k > bound {
                        return Err(parse_err(lineno, format!("index {k} outside 1..={bound}")));
                    }
                    Ok(k - 1)
                };
                let i = idx(tok[0], rows)?;
                let j = idx(tok[1], cols)?;
                let v = if pattern {
                    1.0
                } else {
                    tok[2].parse::<f64>().map_err(|e| parse_err(lineno, e.to_string()))?
                };
                if !v.is_finite() {
                    return Err(parse_err(lineno, "non-finite value"));
                }
                if v < 0.0 {
                    return Err(parse_err(lineno, format!("negative value {v}")));
                }
                entries.push((i, j, v));
            }
        }
    }
    let (rows, cols, nnz) = size.ok_or_else(|| parse_err(1, "missing size line"))?;
    if entries.len() != nnz {
        return Err(parse_err(0, format!("header declares {nnz} entries, found {}", entries.len())));
    }
    entries.retain(|&(_, _, v)| v != 0.0);
    let mut seen: Vec<(usize, usize)> = entries.iter().map(|&(i, j, _)| (i, j)).collect();
    seen.sort_unstable();
    if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
        return Err(parse_err(0, format!("duplicate entry ({}, {})", w[0].0 + 1, w[0].1 + 1)));
    }
    Ok(CoordMatrix { rows, cols, entries })
}

pub fn write_matrix_market<W: Write>(mut w: W, m: &CoordMatrix) -> Result<()> {
    writeln!(w, "{HEADER}")?;
    writeln!(w, "{} {} {}", m.rows, m.cols, m.entries.len())?;
    for &(i, j, v) in &m.entries {
        writeln!(w, "{} {} {}", i + 1, j + 1, v)?;
    }
    Ok(())
}

/// Reads whitespace-separated reals.
pub fn read_vector<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        for tok in line.split_whitespace() {
            let v = tok.parse::<f64>().map_err(|e| parse_err(idx + 1, e.to_string()))?;
            out.push(v);
        }
    }
    Ok(out)
}

/// Loads an instance from a MatrixMarket file and optional sidecar vectors
/// (`b` capacities, `a` objective); absent vectors default to all ones.
pub fn read_instance(matrix: &Path, b: Option<&Path>, a: Option<&Path>) -> Result<GeneralInstance> {
    let m = read_matrix_market(File::open(matrix)?)?;
    let load = |p: Option<&Path>, n: usize, what: &str| -> Result<Vec<f64>> {
        match p {
            None => Ok(vec![1.0; n]),
            Some(p) => {
                let v = read_vector(File::open(p)?)?;
                if v.len() != n {
                    return Err(parse_err(0, format!("{what} has {} values, expected {n}", v.len())));
                }
                Ok(v)
            }
        }
    };
    let b = load(b, m.rows, "capacity vector")?;
    let a = load(a, m.cols, "objective vector")?;
    Ok(GeneralInstance { rows: m.rows, cols: m.cols, entries: m.entries, b, a })
}

pub fn write_instance_matrix(path: &Path, inst: &GeneralInstance) -> Result<()> {
    let f = std::io::BufWriter::new(File::create(path)?);
    write_matrix_market(
        f,
        &CoordMatrix { rows: inst.rows, cols: inst.cols, entries: inst.entries.clone() },
    )
}
