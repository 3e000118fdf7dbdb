use std::cmp::Ordering;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::report::format_float;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// One row per period: a time label column, then one column per series.
    #[default]
    RowsAreTime,
    /// One row per series: a series label column, then one column per period.
    RowsAreSeries,
}

impl FromStr for Layout {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rows_are_time" | "time" => Ok(Layout::RowsAreTime),
            "rows_are_series" | "series" => Ok(Layout::RowsAreSeries),
            other => Err(Error::Config(format!("unknown layout '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateTransform {
    #[default]
    None,
    Log,
    /// (log x − mean)/std with the n − 1 standard deviation.
    LogNormalized,
}

impl FromStr for StateTransform {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(StateTransform::None),
            "log" => Ok(StateTransform::Log),
            "log_normalized" => Ok(StateTransform::LogNormalized),
            other => Err(Error::Config(format!("unknown state transform '{other}'"))),
        }
    }
}

/// N×T panel with labels.
#[derive(Clone, Debug, PartialEq)]
pub struct PanelData {
    pub values: DMatrix<f64>,
    pub series_ids: Vec<String>,
    pub time_ids: Vec<String>,
}

impl PanelData {
    pub fn new(values: DMatrix<f64>, series_ids: Vec<String>, time_ids: Vec<String>) -> Result<Self> {
        if values.nrows() != series_ids.len() || values.ncols() != time_ids.len() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} values with {} series and {} time labels",
                values.nrows(),
                values.ncols(),
                series_ids.len(),
                time_ids.len()
            )));
        }
        check_increasing(&time_ids)?;
        Ok(PanelData { values, series_ids, time_ids })
    }

    /// Labels 0..n and 0..t.
    pub fn unlabeled(values: DMatrix<f64>) -> Self {
        let series_ids = (0..values.nrows()).map(|i| format!("x{i}")).collect();
        let time_ids = (0..values.ncols()).map(|t| t.to_string()).collect();
        PanelData { values, series_ids, time_ids }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateSeries {
    pub values: Vec<f64>,
    pub id: String,
    pub transform: StateTransform,
}

/// Orders labels numerically when both parse as numbers, otherwise as strings.
fn label_cmp(a: &str, b: &str) -> Ordering {
    match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
        (Ok(x), Ok(y)) => x.partial_cmp(&y).unwrap_or(Ordering::Equal),
        _ => a.cmp(b),
    }
}

fn check_increasing(ids: &[String]) -> Result<()> {
    for k in 1..ids.len() {
        if label_cmp(&ids[k - 1], &ids[k]) != Ordering::Less {
            return Err(Error::MisalignedState(format!(
                "time labels must be strictly increasing: '{}' then '{}'",
                ids[k - 1], ids[k]
            )));
        }
    }
    Ok(())
}

pub fn apply_transform(values: &[f64], transform: StateTransform) -> Result<Vec<f64>> {
    if transform == StateTransform::None {
        return Ok(values.to_vec());
    }
    let logs: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(t, &v)| if v > 0.0 { Ok(v.ln()) } else { Err(Error::NonFiniteValue { row: t, column: 0 }) })
        .collect::<Result<_>>()?;
    if transform == StateTransform::Log {
        return Ok(logs);
    }
    let n = logs.len() as f64;
    if logs.len() < 2 {
        return Err(Error::ZeroDenominator);
    }
    let mean = logs.iter().sum::<f64>() / n;
    let sd = (logs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if !(sd > 0.0) {
        return Err(Error::ZeroDenominator);
    }
    Ok(logs.iter().map(|v| (v - mean) / sd).collect())
}

fn parse_cell(text: &str, row: usize, column: usize) -> Result<f64> {
    let t = text.trim();
    if t.is_empty() {
        return Err(Error::MissingCell { row, column });
    }
    let v: f64 = t.parse().map_err(|_| Error::ParseError { row, column, text: t.to_string() })?;
    if !v.is_finite() {
        return Err(Error::NonFiniteValue { row, column });
    }
    Ok(v)
}

/// Reads a labeled panel. Row and column numbers in errors are 1-based file coordinates.
pub fn load_panel_csv(
    path: impl AsRef<Path>,
    layout: Layout,
    state_column: Option<&str>,
    transform: StateTransform,
) -> Result<(PanelData, Option<StateSeries>)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_path(path.as_ref())?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.len() < 2 {
        return Err(Error::ParseError { row: 1, column: 1, text: "need a label column and at least one data column".into() });
    }
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = k + 2;
        if rec.len() > header.len() {
            return Err(Error::ParseError { row, column: header.len() + 1, text: "extra cell".into() });
        }
        let label = rec.get(0).unwrap_or("").trim().to_string();
        if label.is_empty() {
            return Err(Error::MissingCell { row, column: 1 });
        }
        let vals = (1..header.len())
            .map(|c| parse_cell(rec.get(c).unwrap_or(""), row, c + 1))
            .collect::<Result<Vec<f64>>>()?;
        labels.push(label);
        rows.push(vals);
    }
    if rows.is_empty() {
        return Err(Error::ParseError { row: 2, column: 1, text: "no data rows".into() });
    }

    let (values, series_ids, time_ids, state_raw) = match layout {
        Layout::RowsAreTime => {
            let state_idx = match state_column {
                Some(name) => Some(header[1..].iter().position(|h| h == name).ok_or_else(|| {
                    Error::MisalignedState(format!("state column '{name}' not found in header"))
                })?),
                None => None,
            };
            let keep: Vec<usize> = (0..header.len() - 1).filter(|&c| Some(c) != state_idx).collect();
            if keep.is_empty() {
                return Err(Error::DimensionMismatch("no series columns besides the state".into()));
            }
            let values = DMatrix::from_fn(keep.len(), rows.len(), |i, t| rows[t][keep[i]]);
            let series_ids = keep.iter().map(|&c| header[c + 1].clone()).collect();
            let state = state_idx.map(|c| (header[c + 1].clone(), rows.iter().map(|r| r[c]).collect::<Vec<_>>()));
            (values, series_ids, labels, state)
        }
        Layout::RowsAreSeries => {
            let state_idx = match state_column {
                Some(name) => Some(labels.iter().position(|l| l == name).ok_or_else(|| {
                    Error::MisalignedState(format!("state row '{name}' not found"))
                })?),
                None => None,
            };
            let keep: Vec<usize> = (0..rows.len()).filter(|&r| Some(r) != state_idx).collect();
            if keep.is_empty() {
                return Err(Error::DimensionMismatch("no series rows besides the state".into()));
            }
            let t = header.len() - 1;
            let values = DMatrix::from_fn(keep.len(), t, |i, k| rows[keep[i]][k]);
            let series_ids = keep.iter().map(|&r| labels[r].clone()).collect();
            let state = state_idx.map(|r| (labels[r].clone(), rows[r].clone()));
            (values, series_ids, header[1..].to_vec(), state)
        }
    };
    let panel = PanelData::new(values, series_ids, time_ids)?;
    let state = match state_raw {
        Some((id, raw)) => Some(StateSeries { values: apply_transform(&raw, transform)?, id, transform }),
        None => None,
    };
    Ok((panel, state))
}

/// Reads a single state series: a time label column and one value column.
pub fn load_state_csv(path: impl AsRef<Path>, column: Option<&str>, transform: StateTransform) -> Result<StateSeries> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path.as_ref())?;
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let col = match column {
        Some(name) => header.iter().position(|h| h == name).ok_or_else(|| {
            Error::MisalignedState(format!("state column '{name}' not found in header"))
        })?,
        None if header.len() >= 2 => 1,
        None => return Err(Error::ParseError { row: 1, column: 1, text: "state file needs two columns".into() }),
    };
    let mut values = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        values.push(parse_cell(rec.get(col).unwrap_or(""), k + 2, col + 1)?);
    }
    Ok(StateSeries { values: apply_transform(&values, transform)?, id: header[col].clone(), transform })
}

/// Checks that a state series matches the panel's time axis.
pub fn align_state(panel: &PanelData, state: &StateSeries) -> Result<()> {
    if state.values.len() != panel.time_ids.len() {
        return Err(Error::MisalignedState(format!(
            "state has {} observations, panel has {} periods",
            state.values.len(),
            panel.time_ids.len()
        )));
    }
    Ok(())
}

/// Writes a panel in the given layout, optionally with the state as an extra column or row.
pub fn write_panel_csv(
    panel: &PanelData,
    state: Option<&StateSeries>,
    layout: Layout,
    path: impl AsRef<Path>,
) -> Result<()> {
    if let Some(s) = state {
        align_state(panel, s)?;
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path.as_ref())?;
    let (n, t) = panel.values.shape();
    match layout {
        Layout::RowsAreTime => {
            let mut head = vec!["time".to_string()];
            head.extend(panel.series_ids.iter().cloned());
            if let Some(s) = state {
                head.push(s.id.clone());
            }
            w.write_record(&head)?;
            for k in 0..t {
                let mut rec = vec![panel.time_ids[k].clone()];
                rec.extend((0..n).map(|i| format_float(panel.values[(i, k)])));
                if let Some(s) = state {
                    rec.push(format_float(s.values[k]));
                }
                w.write_record(&rec)?;
            }
        }
        Layout::RowsAreSeries => {
            let mut head = vec!["series".to_string()];
            head.extend(panel.time_ids.iter().cloned());
            w.write_record(&head)?;
            for i in 0..n {
                let mut rec = vec![panel.series_ids[i].clone()];
                rec.extend((0..t).map(|k| format_float(panel.values[(i, k)])));
                w.write_record(&rec)?;
            }
            if let Some(s) = state {
                let mut rec = vec![s.id.clone()];
                rec.extend(s.values.iter().map(|&v| format_float(v)));
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
