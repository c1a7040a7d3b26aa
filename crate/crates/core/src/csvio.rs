//! Dataset CSV reading and writing, plus atomic file output.
//!
//! Layout: a header row, feature columns, a `label` column holding -1/1
//! or 0/1, and an optional `eta` column with the true posterior.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::data::{Dataset, Features, Label};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IngestSummary {
    pub rows: usize,
    pub features: usize,
    pub positives: usize,
    pub negatives: usize,
    /// Labels arrived as 0/1 and 0 was read as -1.
    pub zero_one_labels: bool,
    pub has_eta: bool,
}

fn csv_err(line: u64, message: impl Into<String>) -> Error {
    Error::Csv {
        line,
        message: message.into(),
    }
}

pub fn read_dataset<R: Read>(reader: R, name: &str) -> Result<(Dataset, IngestSummary)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_err(1, e.to_string()))?.clone();
    let find = |n: &str| header.iter().position(|h| h.eq_ignore_ascii_case(n));
    let label_col = find("label").ok_or_else(|| csv_err(1, "no `label` column"))?;
    let eta_col = find("eta");
    let feat_cols: Vec<usize> = (0..header.len()).filter(|&c| c != label_col && Some(c) != eta_col).collect();

    let mut data = Vec::new();
    let mut raw_labels = Vec::new();
    let mut eta = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            csv_err(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != header.len() {
            return Err(csv_err(line, format!("expected {} fields, found {}", header.len(), rec.len())));
        }
        let num = |c: usize| -> Result<f64> {
            let v: f64 = rec[c]
                .parse()
                .map_err(|_| csv_err(line, format!("column `{}`: cannot parse '{}'", &header[c], &rec[c])))?;
            if !v.is_finite() {
                return Err(csv_err(line, format!("column `{}` is not finite", &header[c])));
            }
            Ok(v)
        };
        for &c in &feat_cols {
            data.push(num(c)?);
        }
        let l = num(label_col)?;
        if l != -1.0 && l != 0.0 && l != 1.0 {
            return Err(csv_err(line, format!("label {l} is not binary")));
        }
        raw_labels.push((l, line));
        if let Some(c) = eta_col {
            let e = num(c)?;
            if !(0.0..=1.0).contains(&e) {
                return Err(csv_err(line, format!("eta {e} outside [0,1]")));
            }
            eta.push(e);
        }
    }
    let has_zero = raw_labels.iter().any(|(l, _)| *l == 0.0);
    if has_zero {
        if let Some((_, line)) = raw_labels.iter().find(|(l, _)| *l == -1.0) {
            return Err(csv_err(*line, "labels mix -1 and 0"));
        }
    }
    let labels: Vec<Label> = raw_labels
        .iter()
        .map(|(l, _)| if *l == 1.0 { Label::Pos } else { Label::Neg })
        .collect();
    let n = labels.len();
    let features = Features::new(n, feat_cols.len(), data)?;
    let ds = Dataset::new(features, labels, eta_col.map(|_| eta), name)?;
    let (positives, negatives) = ds.class_counts();
    let summary = IngestSummary {
        rows: n,
        features: feat_cols.len(),
        positives,
        negatives,
        zero_one_labels: has_zero,
        has_eta: eta_col.is_some(),
    };
    Ok((ds, summary))
}

/// Loads a dataset CSV; the file stem becomes the dataset name.
pub fn ingest_csv(path: &Path) -> Result<(Dataset, IngestSummary)> {
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
    read_dataset(fs::File::open(path)?, name)
}

pub fn write_dataset<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut head: Vec<String> = (1..=data.n_features()).map(|j| format!("x{j}")).collect();
    head.push("label".into());
    if data.true_eta().is_some() {
        head.push("eta".into());
    }
    w.write_record(&head).map_err(|e| csv_err(0, e.to_string()))?;
    for i in 0..data.len() {
        let mut row: Vec<String> = data.row(i).iter().map(|v| v.to_string()).collect();
        row.push(data.labels()[i].as_int().to_string());
        if let Some(e) = data.true_eta() {
            row.push(e[i].to_string());
        }
        w.write_record(&row).map_err(|e| csv_err(i as u64 + 2, e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes through a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let file = path.file_name().and_then(|s| s.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{file}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

pub fn save_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut buf = Vec::new();
    write_dataset(&mut buf, data)?;
    write_atomic(path, &buf)
}

/// Serializes rows of one record type into CSV bytes.
pub fn records_to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(0, e.to_string()))?;
    }
    w.into_inner().map_err(|e| csv_err(0, e.to_string()))
}
