//! Matrix Market files: symmetric coordinate matrices and dense array vectors.
//!
//! Matrices are written as `coordinate real symmetric` with the lower triangle, 1-based.
//! Reading also accepts `integer` entries and the `general` qualifier when the stored
//! entries happen to be symmetric. Floats are written in shortest round-trip form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use gtrs_core::sparse::SparseSymmetric;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    Symmetric,
    General,
}

struct Header {
    format: String,
    symmetry: Symmetry,
}

fn parse_header(line: Option<&str>, path: &Path) -> Result<Header, CliError> {
    let err = |msg: &str| CliError::parse(path, msg);
    let line = line.ok_or_else(|| err("empty file"))?;
    let words: Vec<String> = line.split_whitespace().map(|w| w.to_ascii_lowercase()).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(err("missing '%%MatrixMarket matrix' header"));
    }
    match words[3].as_str() {
        "real" | "integer" | "double" => {}
        other => return Err(err(&format!("unsupported field '{other}'"))),
    }
    let symmetry = match words[4].as_str() {
        "symmetric" => Symmetry::Symmetric,
        "general" => Symmetry::General,
        other => return Err(err(&format!("unsupported symmetry '{other}'"))),
    };
    Ok(Header {
        format: words[2].clone(),
        symmetry,
    })
}

/// Non-comment, non-blank lines after the header, with 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .skip(1)
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('%'))
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, path: &Path, line: usize) -> Result<T, CliError> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| CliError::parse(path, &format!("malformed entry on line {line}")))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<SparseSymmetric, CliError> {
    let text = read_text(path)?;
    let header = parse_header(text.lines().next(), path)?;
    if header.format != "coordinate" {
        return Err(CliError::parse(path, "matrix files must use the coordinate format"));
    }
    let mut lines = data_lines(&text);
    let (ln, size) = lines
        .next()
        .ok_or_else(|| CliError::parse(path, "missing size line"))?;
    let mut toks = size.split_whitespace();
    let rows: usize = parse_num(toks.next(), path, ln)?;
    let cols: usize = parse_num(toks.next(), path, ln)?;
    let nnz: usize = parse_num(toks.next(), path, ln)?;
    if rows != cols {
        return Err(CliError::parse(path, &format!("matrix is {rows}x{cols}, not square")));
    }
    let mut lower = Vec::with_capacity(nnz);
    let mut upper = Vec::new();
    let mut count = 0;
    for (ln, l) in lines {
        let mut toks = l.split_whitespace();
        let i: usize = parse_num(toks.next(), path, ln)?;
        let j: usize = parse_num(toks.next(), path, ln)?;
        let v: f64 = parse_num(toks.next(), path, ln)?;
        if i == 0 || j == 0 || i > rows || j > cols {
            return Err(CliError::parse(path, &format!("index ({i}, {j}) out of range on line {ln}")));
        }
        count += 1;
        let (i, j) = (i - 1, j - 1);
        match header.symmetry {
            Symmetry::Symmetric => {
                if i < j {
                    return Err(CliError::parse(
                        path,
                        &format!("upper-triangle entry in symmetric file on line {ln}"),
                    ));
                }
                lower.push((i, j, v));
            }
            Symmetry::General if i >= j => lower.push((i, j, v)),
            Symmetry::General => upper.push((j, i, v)),
        }
    }
    if count != nnz {
        return Err(CliError::parse(path, &format!("expected {nnz} entries, found {count}")));
    }
    if header.symmetry == Symmetry::General {
        let mut lo: Vec<_> = lower.iter().filter(|(i, j, _)| i != j).copied().collect();
        lo.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        upper.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        if lo != upper {
            return Err(CliError::parse(path, "general matrix is not symmetric"));
        }
    }
    SparseSymmetric::from_triplets(rows, lower).map_err(|e| CliError::parse(path, &e.to_string()))
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = read_text(path)?;
    let header = parse_header(text.lines().next(), path)?;
    if header.format != "array" {
        return Err(CliError::parse(path, "vector files must use the array format"));
    }
    let mut lines = data_lines(&text);
    let (ln, size) = lines
        .next()
        .ok_or_else(|| CliError::parse(path, "missing size line"))?;
    let mut toks = size.split_whitespace();
    let rows: usize = parse_num(toks.next(), path, ln)?;
    let cols: usize = parse_num(toks.next(), path, ln)?;
    if cols != 1 {
        return Err(CliError::parse(path, &format!("vector has {cols} columns")));
    }
    let mut out = Vec::with_capacity(rows);
    for (ln, l) in lines {
        out.push(parse_num::<f64>(Some(l), path, ln)?);
    }
    if out.len() != rows {
        return Err(CliError::parse(path, &format!("expected {rows} values, found {}", out.len())));
    }
    Ok(out)
}

pub fn format_matrix(m: &SparseSymmetric) -> String {
    let mut entries: Vec<(usize, usize, f64)> = m.entries().iter().map(|&(i, j, v)| (j, i, v)).collect();
    entries.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
    let mut s = String::from("%%MatrixMarket matrix coordinate real symmetric\n");
    let _ = writeln!(s, "{} {} {}", m.n(), m.n(), entries.len());
    for (i, j, v) in entries {
        let _ = writeln!(s, "{} {} {:e}", i + 1, j + 1, v);
    }
    s
}

pub fn format_vector(v: &[f64]) -> String {
    let mut s = String::from("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(s, "{} 1", v.len());
    for x in v {
        let _ = writeln!(s, "{x:e}");
    }
    s
}

pub fn write_matrix(path: &Path, m: &SparseSymmetric) -> Result<(), CliError> {
    fs::write(path, format_matrix(m)).map_err(|e| CliError::io(path, e))
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<(), CliError> {
    fs::write(path, format_vector(v)).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn matrix_round_trip() {
        let m = SparseSymmetric::from_triplets(3, vec![(0, 0, 1.5), (2, 0, -0.1), (1, 1, 3.0e-20)]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.mtx");
        write_matrix(&p, &m).unwrap();
        assert_eq!(read_matrix(&p).unwrap(), m);
    }

    #[test]
    fn vector_round_trip_is_exact() {
        let v = vec![0.1, -1.0 / 3.0, 1e300, 0.0];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.mtx");
        write_vector(&p, &v).unwrap();
        assert_eq!(read_vector(&p).unwrap(), v);
    }

    #[test]
    fn comments_and_general_symmetric() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(
            &dir,
            "g.mtx",
            "%%MatrixMarket matrix coordinate real general\n% note\n2 2 3\n1 1 2\n1 2 -1\n2 1 -1\n",
        );
        let m = read_matrix(&p).unwrap();
        assert_eq!(m.to_dense(), vec![2.0, -1.0, -1.0, 0.0]);
    }

    #[test]
    fn malformed_inputs_name_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            ("empty.mtx", ""),
            ("upper.mtx", "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 2 1\n"),
            ("count.mtx", "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1\n"),
            ("range.mtx", "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 1\n"),
            ("asym.mtx", "%%MatrixMarket matrix coordinate real general\n2 2 1\n2 1 1\n"),
            ("complex.mtx", "%%MatrixMarket matrix coordinate complex symmetric\n1 1 1\n1 1 1 0\n"),
        ];
        for (name, body) in cases {
            let p = write_tmp(&dir, name, body);
            let e = read_matrix(&p).unwrap_err();
            assert!(e.to_string().contains(name), "{name}: {e}");
        }
        let p = write_tmp(&dir, "short.mtx", "%%MatrixMarket matrix array real general\n3 1\n1\n2\n");
        assert!(read_vector(&p).is_err());
    }
}
