use std::fmt::Write as _;
use std::path::Path;

use super::Mat;
use crate::error::{Error, Result};

/// Parses the text format: a `rows cols` header followed by `rows` lines of
/// whitespace-separated numbers. Blank lines and `#` comments are skipped.
pub fn parse_matrix(text: &str) -> Result<Mat> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad header {header:?}"))))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse(format!("header must be `rows cols`, got {header:?}")));
    };
    let mut data = Vec::with_capacity(rows * cols);
    for (i, line) in lines.enumerate() {
        if i >= rows {
            return Err(Error::Parse(format!("more than {rows} data rows")));
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            let x: f64 = tok
                .parse()
                .map_err(|_| Error::Parse(format!("bad number {tok:?} on row {}", i + 1)))?;
            data.push(x);
        }
        if data.len() - before != cols {
            return Err(Error::Parse(format!(
                "row {} has {} entries, expected {cols}",
                i + 1,
                data.len() - before
            )));
        }
    }
    if data.len() != rows * cols {
        return Err(Error::Parse(format!(
            "expected {rows} rows, found {}",
            data.len() / cols.max(1)
        )));
    }
    Mat::new(rows, cols, data).map_err(|e| Error::Parse(e.to_string()))
}

/// Formats with 17 significant digits so that parsing round-trips exactly.
pub fn format_matrix(m: &Mat) -> String {
    let mut out = format!("{} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|x| format!("{x:.16e}")).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Mat> {
    parse_matrix(&std::fs::read_to_string(path)?)
}

pub fn write_matrix(path: impl AsRef<Path>, m: &Mat) -> Result<()> {
    std::fs::write(path, format_matrix(m))?;
    Ok(())
}
