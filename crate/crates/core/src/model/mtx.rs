//! MatrixMarket reader and writer (real coordinate and array formats).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Symm {
    General,
    Symmetric,
}

struct Parsed {
    layout: Layout,
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

fn parse(path: &Path, text: &str) -> Result<Parsed> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::parse(path, "empty file"))?;
    let tok: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tok.len() != 5 || tok[0] != "%%matrixmarket" || tok[1] != "matrix" {
        return Err(Error::parse(path, format!("bad header `{header}`")));
    }
    let layout = match tok[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(Error::parse(path, format!("unsupported format `{other}`"))),
    };
    if tok[3] != "real" && tok[3] != "integer" && tok[3] != "double" {
        return Err(Error::parse(path, format!("unsupported field `{}`", tok[3])));
    }
    let symm = match tok[4].as_str() {
        "general" => Symm::General,
        "symmetric" => Symm::Symmetric,
        other => return Err(Error::parse(path, format!("unsupported symmetry `{other}`"))),
    };
    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (sno, size_line) = body.next().ok_or_else(|| Error::parse(path, "missing size line"))?;
    let sizes: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse(path, format!("line {}: {e}", sno + 1)))?;
    let num = |lno: usize, t: &str| -> Result<f64> {
        t.parse::<f64>()
            .map_err(|e| Error::parse(path, format!("line {}: `{t}`: {e}", lno + 1)))
    };
    match layout {
        Layout::Coordinate => {
            let [nrows, ncols, nnz] = sizes[..] else {
                return Err(Error::parse(path, "coordinate size line needs 3 integers"));
            };
            let mut entries = Vec::with_capacity(nnz);
            for (lno, line) in body {
                let t: Vec<&str> = line.split_whitespace().collect();
                if t.len() != 3 {
                    return Err(Error::parse(path, format!("line {}: expected `i j value`", lno + 1)));
                }
                let i: usize = t[0]
                    .parse()
                    .map_err(|e| Error::parse(path, format!("line {}: {e}", lno + 1)))?;
                let j: usize = t[1]
                    .parse()
                    .map_err(|e| Error::parse(path, format!("line {}: {e}", lno + 1)))?;
                if i == 0 || j == 0 || i > nrows || j > ncols {
                    return Err(Error::parse(path, format!("line {}: index out of range", lno + 1)));
                }
                let v = num(lno, t[2])?;
                entries.push((i - 1, j - 1, v));
                if symm == Symm::Symmetric && i != j {
                    entries.push((j - 1, i - 1, v));
                }
            }
            let stored = entries.len();
            if symm == Symm::General && stored != nnz {
                return Err(Error::parse(path, format!("expected {nnz} entries, found {stored}")));
            }
            Ok(Parsed { layout, nrows, ncols, entries })
        }
        Layout::Array => {
            let [nrows, ncols] = sizes[..] else {
                return Err(Error::parse(path, "array size line needs 2 integers"));
            };
            let mut vals = Vec::with_capacity(nrows * ncols);
            for (lno, line) in body {
                for t in line.split_whitespace() {
                    vals.push(num(lno, t)?);
                }
            }
            let mut entries = Vec::new();
            match symm {
                Symm::General => {
                    if vals.len() != nrows * ncols {
                        return Err(Error::parse(
                            path,
                            format!("expected {} values, found {}", nrows * ncols, vals.len()),
                        ));
                    }
                    for j in 0..ncols {
                        for i in 0..nrows {
                            entries.push((i, j, vals[i + j * nrows]));
                        }
                    }
                }
                Symm::Symmetric => {
                    if nrows != ncols || vals.len() != nrows * (nrows + 1) / 2 {
                        return Err(Error::parse(path, "bad symmetric array size"));
                    }
                    let mut it = vals.into_iter();
                    for j in 0..ncols {
                        for i in j..nrows {
                            let v = it.next().expect("count checked");
                            entries.push((i, j, v));
                            if i != j {
                                entries.push((j, i, v));
                            }
                        }
                    }
                }
            }
            Ok(Parsed { layout, nrows, ncols, entries })
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Reads a sparse matrix; array files keep their nonzero entries.
pub fn read_sparse(path: &Path) -> Result<CsrMatrix> {
    let p = parse(path, &read_text(path)?)?;
    let dense = p.layout == Layout::Array;
    let entries = p.entries.into_iter().filter(|e| !dense || e.2 != 0.0);
    CsrMatrix::from_triplets(p.nrows, p.ncols, entries).map_err(|e| Error::parse(path, e.to_string()))
}

pub fn read_dense(path: &Path) -> Result<DMatrix<f64>> {
    let p = parse(path, &read_text(path)?)?;
    let mut m = DMatrix::zeros(p.nrows, p.ncols);
    for (i, j, v) in p.entries {
        m[(i, j)] += v;
    }
    Ok(m)
}

/// Finite value with 17 significant digits.
fn fmt_value(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").expect("writing to a string");
}

pub fn coordinate_text(m: &CsrMatrix) -> String {
    let mut s = String::with_capacity(32 * (m.nnz() + 2));
    s.push_str("%%MatrixMarket matrix coordinate real general\n");
    writeln!(s, "{} {} {}", m.nrows(), m.ncols(), m.nnz()).expect("string");
    for (i, j, v) in m.triplets() {
        write!(s, "{} {} ", i + 1, j + 1).expect("string");
        fmt_value(&mut s, v);
        s.push('\n');
    }
    s
}

pub fn array_text(m: &DMatrix<f64>) -> String {
    let mut s = String::with_capacity(26 * (m.len() + 2));
    s.push_str("%%MatrixMarket matrix array real general\n");
    writeln!(s, "{} {}", m.nrows(), m.ncols()).expect("string");
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            fmt_value(&mut s, m[(i, j)]);
            s.push('\n');
        }
    }
    s
}

fn check_finite<'a>(mut vals: impl Iterator<Item = &'a f64>, path: &Path) -> Result<()> {
    if vals.any(|v| !v.is_finite()) {
        return Err(Error::parse(path, "refusing to write a non-finite value"));
    }
    Ok(())
}

pub fn write_coordinate(path: &Path, m: &CsrMatrix) -> Result<()> {
    let vals: Vec<f64> = m.triplets().map(|t| t.2).collect();
    check_finite(vals.iter(), path)?;
    fs::write(path, coordinate_text(m)).map_err(|e| Error::io(path, e))
}

pub fn write_array(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    check_finite(m.iter(), path)?;
    fs::write(path, array_text(m)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reads_symmetric_coordinate() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.mtx");
        fs::write(
            &p,
            "%%MatrixMarket matrix coordinate real symmetric\n% c\n2 2 2\n1 1 2.0\n2 1 -1.0\n",
        )
        .unwrap();
        let m = read_sparse(&p).unwrap().to_dense();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 0.0]));
    }

    #[test]
    fn parse_errors_name_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.mtx");
        fs::write(&p, "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n").unwrap();
        let err = read_sparse(&p).unwrap_err().to_string();
        assert!(err.contains("bad.mtx"), "{err}");
    }

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(vals in prop::collection::vec(-1e6f64..1e6, 12)) {
            let dir = tempfile::tempdir().unwrap();
            let d = DMatrix::from_column_slice(3, 4, &vals);
            let pa = dir.path().join("a.mtx");
            write_array(&pa, &d).unwrap();
            prop_assert_eq!(read_dense(&pa).unwrap(), d.clone());
            let sp = CsrMatrix::from_dense(&d);
            let pc = dir.path().join("c.mtx");
            write_coordinate(&pc, &sp).unwrap();
            prop_assert_eq!(read_sparse(&pc).unwrap(), sp);
        }
    }
}
