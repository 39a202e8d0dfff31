//! CSV input (`date,value`) and the audit/report outputs of the empirical pipeline.

use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};

pub const DATE_FORMAT: &str = "%Y-%m-%d";

/// A dated series; `None` marks a missing or nonnumeric entry.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub source_id: String,
    pub rows: Vec<(NaiveDate, Option<f64>)>,
}

impl RawSeries {
    pub fn new(
        source_id: impl Into<String>,
        mut rows: Vec<(NaiveDate, Option<f64>)>,
    ) -> Result<Self> {
        let source_id = source_id.into();
        rows.sort_by_key(|r| r.0);
        if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidInput(format!(
                "{source_id}: duplicate date {}",
                w[0].0
            )));
        }
        for r in &mut rows {
            if r.1.is_some_and(|v| !v.is_finite()) {
                r.1 = None;
            }
        }
        Ok(Self { source_id, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.rows.iter().map(|r| r.0)
    }

    pub fn n_valid(&self) -> usize {
        self.rows.iter().filter(|r| r.1.is_some()).count()
    }
}

/// Reads a `date,<column>` CSV file; `column` defaults to `value`.
pub fn read_series(path: &Path, column: Option<&str>) -> Result<RawSeries> {
    let file = std::fs::File::open(path).map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    read_series_from(file, column, &id).map_err(|e| match e {
        Error::Csv { message, .. } => Error::Csv {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

pub fn read_series_from<R: Read>(
    input: R,
    column: Option<&str>,
    source_id: &str,
) -> Result<RawSeries> {
    let column = column.unwrap_or("value");
    let csv_err = |message: String| Error::Csv {
        path: source_id.into(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| csv_err(e.to_string()))?
        .clone();
    let date_col = headers
        .iter()
        .position(|h| h == "date")
        .ok_or_else(|| csv_err("missing `date` column".into()))?;
    let value_col = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| csv_err(format!("missing `{column}` column")))?;

    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| csv_err(format!("line {line}: {e}")))?;
        let date_text = record.get(date_col).unwrap_or("");
        let date = NaiveDate::parse_from_str(date_text, DATE_FORMAT)
            .map_err(|_| csv_err(format!("line {line}: bad date '{date_text}'")))?;
        let value = record
            .get(value_col)
            .and_then(|v| v.parse::<f64>().ok())
            .filter(|v| v.is_finite());
        rows.push((date, value));
    }
    RawSeries::new(source_id, rows).map_err(|e| csv_err(e.to_string()))
}

/// Writes a `date,value` file; missing entries are written as empty fields.
pub fn write_series<W: Write>(out: W, series: &RawSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = csv_writer_error(&series.source_id);
    w.write_record(["date", "value"]).map_err(&err)?;
    for (date, value) in &series.rows {
        let v = value.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([date.format(DATE_FORMAT).to_string(), v])
            .map_err(&err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_writer_error(label: &str) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Csv {
        path: label.into(),
        message: e.to_string(),
    }
}
