//! Tabular process data: CSV ingestion, column projection, quality
//! reporting and random partitioning.
//!
//! Targets follow the production convention: `1` marks a normal product and
//! `0` a defective one.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_TARGET_COLUMN: &str = "PassOrFail";

/// Controllable injection-process variables (pressures, screw speeds,
/// barrel/hopper/mold temperatures). Time and position columns are excluded.
pub const DEFAULT_CONTROLLABLE_FEATURES: [&str; 15] = [
    "Max_Screw_RPM",
    "Average_Screw_RPM",
    "Max_Injection_Pressure",
    "Max_Switch_Over_Pressure",
    "Average_Back_Pressure",
    "Barrel_Temperature_1",
    "Barrel_Temperature_2",
    "Barrel_Temperature_3",
    "Barrel_Temperature_4",
    "Barrel_Temperature_5",
    "Barrel_Temperature_6",
    "Barrel_Temperature_7",
    "Hopper_Temperature",
    "Mold_Temperature_3",
    "Mold_Temperature_4",
];

pub const NORMAL: u8 = 1;
pub const DEFECTIVE: u8 = 0;

/// Immutable feature matrix + binary target.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessDataset {
    features: Matrix,
    feature_names: Vec<String>,
    target: Vec<u8>,
}

impl ProcessDataset {
    pub fn new(features: Matrix, feature_names: Vec<String>, target: Vec<u8>) -> Result<Self> {
        if feature_names.len() != features.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: features.n_cols(),
                found: feature_names.len(),
            });
        }
        if target.len() != features.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: features.n_rows(),
                found: target.len(),
            });
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateFeature(name.clone()));
            }
        }
        if let Some((row, &t)) = target.iter().enumerate().find(|(_, &t)| t > 1) {
            return Err(Error::NonBinaryTarget {
                row: row + 1,
                value: t.to_string(),
            });
        }
        for (i, r) in features.rows().enumerate() {
            if let Some(j) = r.iter().position(|v| !v.is_finite()) {
                return Err(Error::MissingValue {
                    row: i + 1,
                    column: feature_names[j].clone(),
                });
            }
        }
        Ok(ProcessDataset {
            features,
            feature_names,
            target,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target(&self) -> &[u8] {
        &self.target
    }

    pub fn n_rows(&self) -> usize {
        self.features.n_rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_cols()
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows() == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// `(normal, defective)` row counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let normal = self.target.iter().filter(|&&t| t == NORMAL).count();
        (normal, self.target.len() - normal)
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> ProcessDataset {
        ProcessDataset {
            features: self.features.select_rows(indices),
            feature_names: self.feature_names.clone(),
            target: indices.iter().map(|&i| self.target[i]).collect(),
        }
    }

    /// Project onto `keep`, in `keep` order.
    pub fn select_features<S: AsRef<str>>(&self, keep: &[S]) -> Result<ProcessDataset> {
        let mut cols = Vec::with_capacity(keep.len());
        for name in keep {
            let name = name.as_ref();
            let j = self
                .feature_index(name)
                .ok_or_else(|| Error::UnknownFeature(name.to_string()))?;
            cols.push(j);
        }
        let names: Vec<String> = keep.iter().map(|s| s.as_ref().to_string()).collect();
        ProcessDataset::new(self.features.select_columns(&cols), names, self.target.clone())
    }

    /// Keep rows for which `pred(features, target)` holds. Order is preserved.
    pub fn filter_rows<F>(&self, mut pred: F) -> ProcessDataset
    where
        F: FnMut(&[f64], u8) -> bool,
    {
        let keep: Vec<usize> = (0..self.n_rows())
            .filter(|&i| pred(self.row(i), self.target[i]))
            .collect();
        self.subset(&keep)
    }

    /// Append the rows of `other`. Schemas must match.
    pub fn concat(&self, other: &ProcessDataset) -> Result<ProcessDataset> {
        if self.feature_names != other.feature_names {
            return Err(Error::param("cannot concatenate datasets with different schemas"));
        }
        let mut features = self.features.clone();
        for r in other.features.rows() {
            features.push_row(r)?;
        }
        let mut target = self.target.clone();
        target.extend_from_slice(&other.target);
        Ok(ProcessDataset {
            features,
            feature_names: self.feature_names.clone(),
            target,
        })
    }

    pub fn write_csv(&self, path: &Path, target_column: &str) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(file, target_column)
    }

    /// Features in column order followed by the target column.
    pub fn write_csv_to<W: Write>(&self, writer: W, target_column: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(target_column);
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for (r, t) in self.features.rows().zip(&self.target) {
            record.clear();
            record.extend(r.iter().map(|v| v.to_string()));
            record.push(t.to_string());
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

fn is_missing_token(s: &str) -> bool {
    matches!(
        s.to_ascii_lowercase().as_str(),
        "" | "na" | "nan" | "null" | "none" | "n/a"
    )
}

fn parse_target(s: &str, row: usize) -> Result<u8> {
    match s.parse::<f64>() {
        Ok(v) if v == 0.0 => Ok(DEFECTIVE),
        Ok(v) if v == 1.0 => Ok(NORMAL),
        _ => Err(Error::NonBinaryTarget {
            row,
            value: s.to_string(),
        }),
    }
}

/// Load a comma-separated file with a header row.
///
/// Every column other than `target_column` whose cells are all numeric becomes
/// a feature, in file order. Columns with no numeric cell at all (identifiers,
/// timestamps, equipment names) are skipped. A numeric column with a stray
/// non-numeric cell is an error, as is any missing or non-finite value.
pub fn load_csv(path: &Path, target_column: &str) -> Result<ProcessDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, target_column)
}

pub fn read_csv<R: Read>(reader: R, target_column: &str) -> Result<ProcessDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let target_idx = header
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| Error::MissingTarget(target_column.to_string()))?;

    let mut cells: Vec<csv::StringRecord> = Vec::new();
    for rec in rdr.records() {
        cells.push(rec?);
    }

    // classify columns: numeric (all non-missing cells parse) or text (none parse)
    let mut feature_cols = Vec::new();
    for (j, name) in header.iter().enumerate() {
        if j == target_idx {
            continue;
        }
        let mut first_numeric = None;
        let mut first_text = None;
        for (i, rec) in cells.iter().enumerate() {
            let s = rec.get(j).unwrap_or("").trim();
            if is_missing_token(s) {
                continue;
            }
            if s.parse::<f64>().is_ok() {
                first_numeric.get_or_insert(i);
            } else {
                first_text.get_or_insert(i);
            }
            if first_numeric.is_some() && first_text.is_some() {
                break;
            }
        }
        match (first_numeric, first_text) {
            (Some(_), Some(i)) => {
                return Err(Error::NonNumeric {
                    row: i + 1,
                    column: name.clone(),
                    value: cells[i].get(j).unwrap_or("").to_string(),
                })
            }
            (None, Some(_)) => {}
            _ => feature_cols.push(j),
        }
    }

    let mut data = Vec::with_capacity(cells.len() * feature_cols.len());
    let mut target = Vec::with_capacity(cells.len());
    for (i, rec) in cells.iter().enumerate() {
        let row = i + 1;
        target.push(parse_target(rec.get(target_idx).unwrap_or("").trim(), row)?);
        for &j in &feature_cols {
            let s = rec.get(j).unwrap_or("").trim();
            let v = s.parse::<f64>().ok().filter(|v| v.is_finite());
            match v {
                Some(v) if !is_missing_token(s) => data.push(v),
                _ => {
                    return Err(Error::MissingValue {
                        row,
                        column: header[j].clone(),
                    })
                }
            }
        }
    }
    let names: Vec<String> = feature_cols.iter().map(|&j| header[j].clone()).collect();
    let features = Matrix::new(cells.len(), names.len(), data)?;
    ProcessDataset::new(features, names, target)
}

/// Per-feature counts of missing values and IQR-fence outliers.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub total_rows: usize,
    pub columns: Vec<ColumnQuality>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnQuality {
    pub name: String,
    pub missing: usize,
    pub outliers: usize,
    pub q1: f64,
    pub q3: f64,
}

impl QualityReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["feature", "missing", "outliers", "q1", "q3", "total_rows"])?;
        for c in &self.columns {
            w.write_record([
                c.name.clone(),
                c.missing.to_string(),
                c.outliers.to_string(),
                c.q1.to_string(),
                c.q3.to_string(),
                self.total_rows.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Count values outside `[Q1 - k·IQR, Q3 + k·IQR]` per feature. Reporting only.
pub fn quality_check(ds: &ProcessDataset, iqr_k: f64) -> Result<QualityReport> {
    if !(iqr_k > 0.0) {
        return Err(Error::param(format!("iqr_k must be > 0, got {iqr_k}")));
    }
    let mut columns = Vec::with_capacity(ds.n_features());
    for (j, name) in ds.feature_names().iter().enumerate() {
        let col = ds.features().column(j);
        let missing = col.iter().filter(|v| !v.is_finite()).count();
        let mut finite: Vec<f64> = col.iter().copied().filter(|v| v.is_finite()).collect();
        finite.sort_by(f64::total_cmp);
        let q1 = quantile_sorted(&finite, 0.25);
        let q3 = quantile_sorted(&finite, 0.75);
        let iqr = q3 - q1;
        let (lo, hi) = (q1 - iqr_k * iqr, q3 + iqr_k * iqr);
        let outliers = finite.iter().filter(|&&v| v < lo || v > hi).count();
        columns.push(ColumnQuality {
            name: name.clone(),
            missing,
            outliers,
            q1,
            q3,
        });
    }
    Ok(QualityReport {
        total_rows: ds.n_rows(),
        columns,
    })
}

/// Train/test partition with the source row indices of each side.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: ProcessDataset,
    pub test: ProcessDataset,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub seed: u64,
}

pub(crate) fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx
}

/// Uniform random split without replacement; `round(test_fraction·N)` rows go
/// to the test side. Both sides keep source order.
pub fn split(ds: &ProcessDataset, test_fraction: f64, seed: u64) -> Result<SplitPair> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::param(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n = ds.n_rows();
    if n < 2 {
        return Err(Error::InsufficientData(format!("split needs at least 2 rows, got {n}")));
    }
    let n_test = (test_fraction * n as f64).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::param(format!(
            "test fraction {test_fraction} leaves an empty side for {n} rows"
        )));
    }
    let idx = shuffled_indices(n, seed);
    let mut test_rows = idx[..n_test].to_vec();
    let mut train_rows = idx[n_test..].to_vec();
    test_rows.sort_unstable();
    train_rows.sort_unstable();
    Ok(SplitPair {
        train: ds.subset(&train_rows),
        test: ds.subset(&test_rows),
        train_rows,
        test_rows,
        seed,
    })
}

/// Holdout row indices for `k` folds. Fold sizes differ by at most one.
pub fn cv_fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::param(format!("fold count must be >= 2, got {k}")));
    }
    if n < k {
        return Err(Error::InsufficientData(format!("{n} rows cannot fill {k} folds")));
    }
    let idx = shuffled_indices(n, seed);
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    for (pos, &row) in idx.iter().enumerate() {
        folds[pos % k].push(row);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// `(train, holdout)` pairs for k-fold cross-validation.
pub fn cv_folds(
    ds: &ProcessDataset,
    k: usize,
    seed: u64,
) -> Result<Vec<(ProcessDataset, ProcessDataset)>> {
    let folds = cv_fold_assignment(ds.n_rows(), k, seed)?;
    let mut in_fold = vec![0usize; ds.n_rows()];
    for (f, rows) in folds.iter().enumerate() {
        for &r in rows {
            in_fold[r] = f;
        }
    }
    Ok(folds
        .iter()
        .enumerate()
        .map(|(f, holdout)| {
            let train: Vec<usize> = (0..ds.n_rows()).filter(|&r| in_fold[r] != f).collect();
            (ds.subset(&train), ds.subset(holdout))
        })
        .collect())
}
