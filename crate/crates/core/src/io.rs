//! File formats: the plain-text matrix format and JSON matrix encoding.
//!
//! Text matrices are `rows cols` on the first line, then one line per row
//! holding `cols` whitespace-separated `re im` pairs. Blank lines and lines
//! starting with `#` are ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{c64, ComplexMatrix};

pub fn parse_matrix(text: &str, origin: &Path) -> Result<ComplexMatrix> {
    let err = |message: String| Error::Parse {
        path: origin.to_path_buf(),
        message,
    };
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| err("empty matrix file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|e| err(format!("bad header {header:?}: {e}"))))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(err(format!("header must be `rows cols`, got {header:?}")));
    };
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let line = lines
            .next()
            .ok_or_else(|| err(format!("expected {rows} rows, found {r}")))?;
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| err(format!("row {r}: {e}"))))
            .collect::<Result<_>>()?;
        if nums.len() != 2 * cols {
            return Err(err(format!(
                "row {r} has {} numbers, expected {} (re im pairs)",
                nums.len(),
                2 * cols
            )));
        }
        data.extend(nums.chunks(2).map(|p| c64(p[0], p[1])));
    }
    if lines.next().is_some() {
        return Err(err(format!("trailing data after {rows} rows")));
    }
    Ok(ComplexMatrix::from_row_slice(rows, cols, &data))
}

pub fn format_matrix(m: &ComplexMatrix) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|c| {
                let z = m[(r, c)];
                format!("{:e} {:e}", z.re, z.im)
            })
            .collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn read_matrix(path: &Path) -> Result<ComplexMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix(&text, path)
}

pub fn write_matrix(path: &Path, m: &ComplexMatrix) -> Result<()> {
    fs::write(path, format_matrix(m)).map_err(|e| Error::io(path, e))
}

/// Serde adapter encoding a matrix as nested `[[re, im], ...]` rows.
pub mod matrix_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::linalg::{c64, ComplexMatrix};

    pub fn serialize<S: Serializer>(m: &ComplexMatrix, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
            .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ComplexMatrix, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        let flat: Vec<_> = rows.iter().flatten().map(|p| c64(p[0], p[1])).collect();
        Ok(ComplexMatrix::from_row_slice(n_rows, n_cols, &flat))
    }
}
