//! CSV click logs in, synthetic CSV out.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use tayfcs_core::data::{Dataset, RawRow, RawTable};

use crate::error::{Error, Result};

fn parse_label(path: &Path, line: u64, raw: &str) -> Result<u8> {
    match raw.trim() {
        "1" | "1.0" => Ok(1),
        "0" | "0.0" | "-1" | "-1.0" => Ok(0),
        other => Err(Error::Csv {
            path: path.into(),
            line,
            message: format!("label {other:?} is not binary"),
        }),
    }
}

/// Read a header-first CSV. Every non-label column becomes a categorical
/// field (values kept as opaque strings); labels `1` are positive, `0` and
/// `-1` negative.
pub fn load_csv(path: &Path, label_column: &str, delimiter: u8) -> Result<RawTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let csv_err = |line: u64, e: csv::Error| Error::Csv {
        path: path.into(),
        line,
        message: e.to_string(),
    };
    let header = reader.headers().map_err(|e| csv_err(1, e))?.clone();
    let label_pos = header
        .iter()
        .position(|h| h.trim() == label_column)
        .ok_or_else(|| Error::Csv {
            path: path.into(),
            line: 1,
            message: format!("no label column {label_column:?}"),
        })?;
    let field_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_pos)
        .map(|(_, h)| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_err(line, e)
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(Error::Csv {
                path: path.into(),
                line,
                message: format!("expected {} columns, found {}", header.len(), record.len()),
            });
        }
        let label = parse_label(path, line, &record[label_pos])?;
        let values = record
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != label_pos)
            .map(|(_, v)| v.to_string())
            .collect();
        rows.push(RawRow { values, label });
    }
    Ok(RawTable {
        field_names,
        label_name: label_column.to_string(),
        rows,
    })
}

/// Write an encoded dataset as CSV, values as `index - 1` (the synthetic
/// generator's raw values), label column last.
pub fn write_dataset_csv(path: &Path, dataset: &Dataset, label_column: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let io = |e: csv::Error| Error::format(path, e.to_string());
    let mut header: Vec<&str> = dataset.fields().iter().map(|f| f.name.as_str()).collect();
    header.push(label_column);
    w.write_record(&header).map_err(io)?;
    let columns: Vec<&[u32]> = (0..dataset.num_fields())
        .map(|f| dataset.column(f))
        .collect::<Result<_, _>>()?;
    let mut record = Vec::with_capacity(header.len());
    for r in 0..dataset.len() {
        record.clear();
        record.extend(columns.iter().map(|c| (i64::from(c[r]) - 1).to_string()));
        record.push(dataset.labels()[r].to_string());
        w.write_record(&record).map_err(io)?;
    }
    let mut inner = w.into_inner().map_err(|e| Error::format(path, e.to_string()))?;
    inner.flush().map_err(|e| Error::io(path, e))
}
