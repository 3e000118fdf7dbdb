use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// 17 significant digits, enough to round-trip any f64.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// A rectangular report with a fixed column order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::DimensionMismatch(format!("row of {} cells for {} columns", row.len(), self.columns.len())));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Square layout with `labels` as the first row and first column.
    pub fn heatmap(labels: &[f64], values: &DMatrix<f64>) -> Result<Self> {
        if values.shape() != (labels.len(), labels.len()) {
            return Err(Error::DimensionMismatch("heatmap must be square over the labels".into()));
        }
        let mut t = Table::new(std::iter::once("s".to_string()).chain(labels.iter().map(|&v| format_float(v))));
        for (i, &l) in labels.iter().enumerate() {
            let mut row = vec![Cell::Num(l)];
            row.extend((0..labels.len()).map(|j| Cell::Num(values[(i, j)])));
            t.rows.push(row);
        }
        Ok(t)
    }

    /// One row per matrix row, columns named by `prefix` and index, led by a label column.
    pub fn from_matrix(label: &str, row_labels: &[String], prefix: &str, m: &DMatrix<f64>) -> Result<Self> {
        if row_labels.len() != m.nrows() {
            return Err(Error::DimensionMismatch("row labels".into()));
        }
        let mut t = Table::new(std::iter::once(label.to_string()).chain((0..m.ncols()).map(|j| format!("{prefix}{}", j + 1))));
        for (i, l) in row_labels.iter().enumerate() {
            let mut row = vec![Cell::Text(l.clone())];
            row.extend(m.row(i).iter().map(|&v| Cell::Num(v)));
            t.rows.push(row);
        }
        Ok(t)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown format '{other}'"))),
        }
    }
}

fn cell_text(c: &Cell, nan_count: &mut usize) -> String {
    match c {
        Cell::Num(v) if v.is_finite() => format_float(*v),
        Cell::Num(_) => {
            *nan_count += 1;
            String::new()
        }
        Cell::Int(v) => v.to_string(),
        Cell::Text(s) => s.clone(),
    }
}

fn render_csv(table: &Table) -> Result<(Vec<u8>, usize)> {
    let mut nan = 0;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(&table.columns)?;
    for row in &table.rows {
        let rec: Vec<String> = row.iter().map(|c| cell_text(c, &mut nan)).collect();
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok((bytes, nan))
}

fn render_json(table: &Table) -> Result<(Vec<u8>, usize)> {
    let mut nan = 0;
    let rows: Vec<Vec<serde_json::Value>> = table
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|c| match c {
                    Cell::Num(v) if v.is_finite() => serde_json::Value::from(*v),
                    Cell::Num(_) => {
                        nan += 1;
                        serde_json::Value::Null
                    }
                    Cell::Int(v) => serde_json::Value::from(*v),
                    Cell::Text(s) => serde_json::Value::from(s.clone()),
                })
                .collect()
        })
        .collect();
    let doc = serde_json::json!({ "columns": table.columns, "rows": rows });
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    Ok((bytes, nan))
}

/// Deterministic serialization. Non-finite numbers become empty cells (null in JSON).
pub fn write_report(table: &Table, format: Format, path: impl AsRef<Path>) -> Result<()> {
    let (bytes, nan) = match format {
        Format::Csv => render_csv(table)?,
        Format::Json => render_json(table)?,
    };
    if nan > 0 {
        log::warn!("{}: {nan} non-finite values written as empty cells", path.as_ref().display());
    }
    if let Some(dir) = path.as_ref().parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::File::create(path.as_ref())?.write_all(&bytes)?;
    Ok(())
}

pub fn render(table: &Table, format: Format) -> Result<String> {
    let (bytes, _) = match format {
        Format::Csv => render_csv(table)?,
        Format::Json => render_json(table)?,
    };
    String::from_utf8(bytes).map_err(|e| Error::InvalidArgument(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_becomes_empty() {
        let mut t = Table::new(["a", "b"]);
        t.push(vec![Cell::Num(f64::NAN), Cell::Num(0.1)]).unwrap();
        let s = render(&t, Format::Csv).unwrap();
        assert_eq!(s, "a,b\n,1.0000000000000001e-1\n");
        assert!(!s.contains("NaN"));
        assert!(render(&t, Format::Json).unwrap().contains("null"));
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 1.7976931348623157e308, 5e-324] {
            assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn heatmap_layout() {
        let m = DMatrix::from_row_slice(2, 2, &[f64::NAN, 0.5, 0.5, f64::NAN]);
        let s = render(&Table::heatmap(&[0.1, 0.9], &m).unwrap(), Format::Csv).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("s,1.0000000000000001e-1,"));
        assert!(lines[1].starts_with("1.0000000000000001e-1,,"));
    }

    #[test]
    fn row_width_checked() {
        let mut t = Table::new(["a"]);
        assert!(t.push(vec![Cell::Int(1), Cell::Int(2)]).is_err());
    }
}
