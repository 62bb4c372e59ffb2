//! Tabular data: CSV ingestion, validation, summaries and deterministic splits.
//!
//! Values are stored row-major. A missing cell is flagged in the mask and its
//! stored value is `NaN`, so a row slice can be handed straight to a predictor
//! that treats `NaN` as "absent".

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error("target column `{0}` is not in the header")]
    MissingTargetColumn(String),
    #[error("column `{0}` contains non-numeric values")]
    NonNumericColumn(String),
    #[error("table has no usable rows")]
    EmptyTable,
    #[error("table has no feature columns")]
    NoFeatures,
    #[error("feature name `{0}` is duplicated")]
    DuplicateFeature(String),
    #[error("feature names must be non-empty")]
    EmptyFeatureName,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("target value at row {0} is missing or non-finite")]
    MissingTarget(usize),
    #[error("train fraction {0} is outside (0, 1)")]
    InvalidFraction(f64),
    #[error("split would leave an empty part (train {train}, test {test})")]
    DegenerateSplit { train: usize, test: usize },
    #[error("fold count {0} must be at least 2")]
    InvalidK(usize),
    #[error("fold count {k} exceeds row count {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("row index {index} out of range for {n} rows")]
    RowOutOfRange { index: usize, n: usize },
}

pub type Result<T> = std::result::Result<T, DataError>;

/// Immutable numeric table with a missing-value mask and a target column.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    feature_names: Vec<String>,
    values: Vec<f64>,
    missing: Vec<bool>,
    target: Vec<f64>,
    target_name: String,
}

impl Table {
    /// Builds a table from row-major values and mask. Masked cells are
    /// normalized to `NaN`; unmasked cells must be finite.
    pub fn new(
        feature_names: Vec<String>,
        values: Vec<f64>,
        missing: Vec<bool>,
        target: Vec<f64>,
        target_name: impl Into<String>,
    ) -> Result<Self> {
        let d = feature_names.len();
        if d == 0 {
            return Err(DataError::NoFeatures);
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if name.is_empty() {
                return Err(DataError::EmptyFeatureName);
            }
            if !seen.insert(name.as_str()) {
                return Err(DataError::DuplicateFeature(name.clone()));
            }
        }
        let n = target.len();
        if n == 0 {
            return Err(DataError::EmptyTable);
        }
        if values.len() != n * d || missing.len() != n * d {
            return Err(DataError::ShapeMismatch(format!(
                "expected {n}x{d} cells, got {} values and {} mask entries",
                values.len(),
                missing.len()
            )));
        }
        if let Some(i) = target.iter().position(|y| !y.is_finite()) {
            return Err(DataError::MissingTarget(i));
        }
        let mut values = values;
        for (cell, &absent) in values.iter_mut().zip(&missing) {
            if absent {
                *cell = f64::NAN;
            } else if !cell.is_finite() {
                return Err(DataError::ShapeMismatch(
                    "present cells must be finite; mark absent cells in the mask".into(),
                ));
            }
        }
        Ok(Self {
            feature_names,
            values,
            missing,
            target,
            target_name: target_name.into(),
        })
    }

    /// Builds a table from dense rows where `NaN` marks a missing cell.
    pub fn from_rows(
        feature_names: Vec<String>,
        rows: &[Vec<f64>],
        target: Vec<f64>,
        target_name: impl Into<String>,
    ) -> Result<Self> {
        let d = feature_names.len();
        if rows.len() != target.len() {
            return Err(DataError::ShapeMismatch(format!(
                "{} rows but {} targets",
                rows.len(),
                target.len()
            )));
        }
        let mut values = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(DataError::ShapeMismatch(format!(
                    "row {i} has {} cells, expected {d}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        let missing = values.iter().map(|v| v.is_nan()).collect();
        Self::new(feature_names, values, missing, target, target_name)
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    /// Row `i` as a slice; missing cells read as `NaN`.
    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_features();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_features())
    }

    /// Row-major cell values (`NaN` where missing).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn missing_mask(&self) -> &[bool] {
        &self.missing
    }

    pub fn is_missing(&self, row: usize, feature: usize) -> bool {
        self.missing[row * self.n_features() + feature]
    }

    pub fn value(&self, row: usize, feature: usize) -> Option<f64> {
        let idx = row * self.n_features() + feature;
        (!self.missing[idx]).then(|| self.values[idx])
    }

    /// Present values of one feature, in row order.
    pub fn present_column(&self, feature: usize) -> Vec<f64> {
        (0..self.n_rows())
            .filter_map(|i| self.value(i, feature))
            .collect()
    }

    /// New table holding the given rows in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let n = self.n_rows();
        let d = self.n_features();
        let mut values = Vec::with_capacity(indices.len() * d);
        let mut missing = Vec::with_capacity(indices.len() * d);
        let mut target = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= n {
                return Err(DataError::RowOutOfRange { index: i, n });
            }
            values.extend_from_slice(self.row(i));
            missing.extend_from_slice(&self.missing[i * d..(i + 1) * d]);
            target.push(self.target[i]);
        }
        Self::new(
            self.feature_names.clone(),
            values,
            missing,
            target,
            self.target_name.clone(),
        )
    }

    /// Same table with every target value passed through `f`.
    pub fn map_target(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let target = self.target.iter().map(|&y| f(y)).collect();
        Self::new(
            self.feature_names.clone(),
            self.values.clone(),
            self.missing.clone(),
            target,
            self.target_name.clone(),
        )
    }

    /// Writes the table as CSV: features in order, then the target column.
    /// Missing cells are written empty; reals use shortest round-trip decimals.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(&self.target_name);
        w.write_record(&header).map_err(csv_err)?;
        let mut record: Vec<String> = Vec::with_capacity(header.len());
        for i in 0..self.n_rows() {
            record.clear();
            for j in 0..self.n_features() {
                record.push(match self.value(i, j) {
                    Some(v) => format!("{v}"),
                    None => String::new(),
                });
            }
            record.push(format!("{}", self.target[i]));
            w.write_record(&record).map_err(csv_err)?;
        }
        w.flush().map_err(|e| DataError::Io(e.to_string()))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = File::create(path.as_ref()).map_err(|e| DataError::Io(e.to_string()))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn csv_err(e: csv::Error) -> DataError {
    DataError::Csv(e.to_string())
}

/// Result of CSV ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedTable {
    pub table: Table,
    /// Rows discarded because their target cell was missing.
    pub dropped_rows: usize,
}

pub fn is_missing_token(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan")
}

fn parse_cell(cell: &str) -> Option<Option<f64>> {
    if is_missing_token(cell) {
        return Some(None);
    }
    match cell.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Some(Some(v)),
        _ => None,
    }
}

/// Loads a CSV file; every column except `target_name` becomes a feature.
pub fn load_csv(path: impl AsRef<Path>, target_name: &str) -> Result<LoadedTable> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => DataError::FileNotFound(path.display().to_string()),
        _ => DataError::Io(e.to_string()),
    })?;
    let mut buf = Vec::new();
    file.read_to_end(&mut buf)
        .map_err(|e| DataError::Io(e.to_string()))?;
    read_csv(buf.as_slice(), target_name)
}

/// Parses CSV from any reader.
pub fn read_csv<R: Read>(reader: R, target_name: &str) -> Result<LoadedTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::None)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let target_col = header
        .iter()
        .position(|h| h == target_name)
        .ok_or_else(|| DataError::MissingTargetColumn(target_name.to_string()))?;
    let feature_cols: Vec<usize> = (0..header.len()).filter(|&c| c != target_col).collect();
    let feature_names: Vec<String> = feature_cols.iter().map(|&c| header[c].clone()).collect();

    let mut values = Vec::new();
    let mut missing = Vec::new();
    let mut target = Vec::new();
    let mut dropped_rows = 0;
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        if record.len() != header.len() {
            return Err(DataError::Csv(format!(
                "record has {} fields, header has {}",
                record.len(),
                header.len()
            )));
        }
        let y = parse_cell(&record[target_col])
            .ok_or_else(|| DataError::NonNumericColumn(target_name.to_string()))?;
        let row_start = values.len();
        for (&c, name) in feature_cols.iter().zip(&feature_names) {
            let cell = parse_cell(&record[c]).ok_or_else(|| DataError::NonNumericColumn(name.clone()))?;
            values.push(cell.unwrap_or(f64::NAN));
            missing.push(cell.is_none());
        }
        match y {
            Some(y) => target.push(y),
            None => {
                // keep scanning feature cells above so bad columns still surface
                values.truncate(row_start);
                missing.truncate(row_start);
                dropped_rows += 1;
            }
        }
    }
    if target.is_empty() {
        return Err(DataError::EmptyTable);
    }
    let table = Table::new(feature_names, values, missing, target, target_name)?;
    Ok(LoadedTable {
        table,
        dropped_rows,
    })
}

/// Seeded shuffle then prefix split. Each part keeps the original row order.
pub fn train_test_split(t: &Table, train_fraction: f64, seed: u64) -> Result<(Table, Table)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::InvalidFraction(train_fraction));
    }
    let n = t.n_rows();
    let n_train = (train_fraction * n as f64).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(DataError::DegenerateSplit {
            train: n_train,
            test: n - n_train,
        });
    }
    let perm = rng::permutation(n, &mut rng::stream(seed, &[0x5917]));
    let mut train_idx = perm[..n_train].to_vec();
    let mut test_idx = perm[n_train..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((t.select_rows(&train_idx)?, t.select_rows(&test_idx)?))
}

/// Assignment of rows to cross-validation folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn n_rows(&self) -> usize {
        self.assignment.len()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }

    /// Rows held out in `fold`, ascending.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n_rows())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    /// Rows used for training when `fold` is held out, ascending.
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n_rows())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }
}

/// Balanced k-fold assignment: the i-th row of a seeded permutation goes to fold `i mod k`.
pub fn kfold_plan(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(DataError::InvalidK(k));
    }
    if k > n {
        return Err(DataError::KTooLarge { k, n });
    }
    let perm = rng::permutation(n, &mut rng::stream(seed, &[0xF01D]));
    let mut assignment = vec![0; n];
    for (pos, &row) in perm.iter().enumerate() {
        assignment[row] = pos % k;
    }
    Ok(FoldPlan { k, assignment })
}

pub fn kfold_split(t: &Table, k: usize, seed: u64) -> Result<FoldPlan> {
    kfold_plan(t.n_rows(), k, seed)
}

pub const SUMMARY_FORMAT: &str = "gbt-trust-summary/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub name: String,
    pub missing_rate: f64,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub mean: Option<f64>,
    /// At most one distinct present value: carries no information for a split.
    pub constant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSummary {
    pub format: String,
    pub n_rows: usize,
    pub n_features: usize,
    pub target: String,
    pub features: Vec<FeatureSummary>,
}

impl TableSummary {
    /// Features that are not constant, i.e. the trainable subset.
    pub fn trainable_features(&self) -> Vec<&str> {
        self.features
            .iter()
            .filter(|f| !f.constant)
            .map(|f| f.name.as_str())
            .collect()
    }
}

pub fn summarize(t: &Table) -> TableSummary {
    let n = t.n_rows();
    let features = (0..t.n_features())
        .map(|j| {
            let col = t.present_column(j);
            let missing_rate = (n - col.len()) as f64 / n as f64;
            let (min, max, mean) = if col.is_empty() {
                (None, None, None)
            } else {
                let min = col.iter().copied().fold(f64::INFINITY, f64::min);
                let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mean = col.iter().sum::<f64>() / col.len() as f64;
                (Some(min), Some(max), Some(mean))
            };
            FeatureSummary {
                name: t.feature_names()[j].clone(),
                missing_rate,
                min,
                max,
                // a constant column's mean can drift by an ulp under summation
                mean: if min == max { min } else { mean },
                constant: min == max,
            }
        })
        .collect();
    TableSummary {
        format: SUMMARY_FORMAT.to_string(),
        n_rows: n,
        n_features: t.n_features(),
        target: t.target_name().to_string(),
        features,
    }
}
