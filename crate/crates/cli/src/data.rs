//! Dataset CSV files: a header row with feature columns `f1..fd` and an
//! optional `label` column (0 = null, 1 = non-null, empty = unlabeled).

use std::path::Path;

use ecot_core::FeatureMatrix;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<Option<u8>>,
    pub dim: usize,
}

impl Dataset {
    pub fn features(&self) -> Result<FeatureMatrix> {
        Ok(FeatureMatrix::from_rows(&self.rows, self.dim)?)
    }

    fn select(&self, label: u8) -> Vec<Vec<f64>> {
        self.rows.iter().zip(&self.labels).filter(|(_, l)| **l == Some(label)).map(|(r, _)| r.clone()).collect()
    }

    /// Splits a fully labeled file into `(D0, D1)`.
    pub fn split_labeled(&self, path: &Path) -> Result<(FeatureMatrix, FeatureMatrix)> {
        if let Some(i) = self.labels.iter().position(Option::is_none) {
            return Err(CliError::data(path, format!("line {}: labeled files need a 0/1 label on every row", i + 2)));
        }
        let null = self.select(0);
        let nonnull = self.select(1);
        let m = |rows: &[Vec<f64>]| -> Result<FeatureMatrix> {
            if rows.is_empty() {
                Ok(FeatureMatrix::empty(self.dim))
            } else {
                Ok(FeatureMatrix::from_rows(rows, self.dim)?)
            }
        };
        Ok((m(&null)?, m(&nonnull)?))
    }

    /// Test labels when every row carries one, `None` when none does.
    pub fn test_labels(&self, path: &Path) -> Result<Option<Vec<bool>>> {
        if self.labels.iter().all(Option::is_none) {
            return Ok(None);
        }
        if self.labels.iter().any(Option::is_none) {
            return Err(CliError::data(path, "test labels must be given on every row or on none"));
        }
        Ok(Some(self.labels.iter().map(|l| *l == Some(1)).collect()))
    }
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(path, e.to_string()))?;
    let headers = reader.headers().map_err(|e| CliError::data(path, e.to_string()))?.clone();
    let mut label_col = None;
    let mut feature_cols = Vec::new();
    for (c, h) in headers.iter().enumerate() {
        if h == "label" {
            if label_col.replace(c).is_some() {
                return Err(CliError::data(path, "duplicate label column"));
            }
        } else {
            feature_cols.push((c, h.to_string()));
        }
    }
    for (k, (_, name)) in feature_cols.iter().enumerate() {
        if *name != format!("f{}", k + 1) {
            return Err(CliError::data(path, format!("header column {name:?} should be f{} (or label)", k + 1)));
        }
    }
    if feature_cols.is_empty() {
        return Err(CliError::data(path, "no feature columns"));
    }
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { expected_len, len, .. } => CliError::data(
                path,
                format!("line {line}: expected {expected_len} fields, found {len}"),
            ),
            _ => CliError::data(path, format!("line {line}: {e}")),
        })?;
        let mut row = Vec::with_capacity(feature_cols.len());
        for (c, name) in &feature_cols {
            let field = &record[*c];
            if field.is_empty() {
                return Err(CliError::data(path, format!("line {line}, column {name}: missing value")));
            }
            let v: f64 = field
                .parse()
                .map_err(|_| CliError::data(path, format!("line {line}, column {name}: cannot parse {field:?}")))?;
            if !v.is_finite() {
                return Err(CliError::data(path, format!("line {line}, column {name}: non-finite value {field}")));
            }
            row.push(v);
        }
        let label = match label_col.map(|c| &record[c]) {
            None | Some("") => None,
            Some("0") => Some(0),
            Some("1") => Some(1),
            Some(other) => {
                return Err(CliError::data(path, format!("line {line}, column label: expected 0, 1 or empty, got {other:?}")))
            }
        };
        rows.push(row);
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(CliError::data(path, "no data rows"));
    }
    Ok(Dataset { dim: feature_cols.len(), rows, labels })
}

/// Serializes a dataset in the same schema. Values are written with Rust's
/// shortest round-trip formatting, so reading the file back is lossless.
pub fn dataset_csv(data: &Dataset) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let with_labels = data.labels.iter().any(Option::is_some);
    let mut header: Vec<String> = (1..=data.dim).map(|k| format!("f{k}")).collect();
    if with_labels {
        header.push("label".into());
    }
    let csv_err = |e: csv::Error| CliError::Config(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for (row, label) in data.rows.iter().zip(&data.labels) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if with_labels {
            rec.push(label.map(|l| l.to_string()).unwrap_or_default());
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::Config(e.to_string()))
}
