//! File formats.
//!
//! Matrices and vectors are headerless CSV, row-major, one matrix row per
//! line, numbers written with 17 significant digits so they round-trip
//! exactly. Vectors are a single column. Index sets are 0-based integers,
//! one per line (commas also accepted on read).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};

/// Shortest-roundtrip is not stable across formatters, so numbers use a
/// fixed `d.dddddddddddddddde±x` layout (17 significant digits).
pub fn format_f64(x: f64) -> String {
    if x == 0.0 {
        // normalizes -0.0 too
        "0".to_string()
    } else if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

pub fn write_matrix_csv(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for i in 0..m.nrows() {
        let line: Vec<String> = m.row(i).iter().map(|&v| format_f64(v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_vector_csv(path: impl AsRef<Path>, v: &Vector) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for &x in v.iter() {
        writeln!(w, "{}", format_f64(x))?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("{}:{}: not a number: {f:?}", path.display(), line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let rows = read_rows(path)?;
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse(format!("{}: rows have different lengths", path.display())));
    }
    if rows.is_empty() {
        return Err(Error::Parse(format!("{}: empty matrix", path.display())));
    }
    let m = Matrix::from_row_iterator(rows.len(), ncols, rows.into_iter().flatten());
    crate::numerics::ensure_finite(m.as_slice(), &path.display().to_string())?;
    Ok(m)
}

/// Accepts a single column or a single row.
pub fn read_vector_csv(path: impl AsRef<Path>) -> Result<Vector> {
    let path = path.as_ref();
    let m = read_matrix_csv(path)?;
    match m.shape() {
        (_, 1) => Ok(m.column(0).into_owned()),
        (1, _) => Ok(m.row(0).transpose()),
        shape => Err(Error::Parse(format!("{}: expected a vector, got a {shape:?} matrix", path.display()))),
    }
}

pub fn write_index_csv(path: impl AsRef<Path>, idx: &[usize]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for j in idx {
        writeln!(w, "{j}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_index_csv(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<usize>().map_err(|_| Error::Parse(format!("{}: bad index {t:?}", path.display()))))
        .collect()
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
