//! Tabular classification data: CSV loading, stratified splits, z-scoring and
//! one-vs-rest label encoding.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A feature matrix with dense class ids.
///
/// `row_ids` records the position of each row in the file it was loaded
/// from, so subsets produced by splitting can be traced back to the source.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    pub row_ids: Vec<usize>,
}

impl Dataset {
    /// Builds a dataset from parts, checking shape and label invariants.
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let (n, d) = features.dim();
        if n == 0 {
            return Err(Error::EmptyData);
        }
        if d == 0 {
            return Err(Error::NoFeatures);
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: labels.len(),
            });
        }
        if feature_names.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: feature_names.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::UnknownClass {
                class: bad,
                n_classes: class_names.len(),
            });
        }
        if let Some((idx, _)) = features.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonNumeric {
                row: idx / d + 1,
                column: feature_names[idx % d].clone(),
                value: features.as_slice().map_or(String::new(), |s| s[idx].to_string()),
            });
        }
        Ok(Self {
            features,
            labels,
            feature_names,
            class_names,
            row_ids: (0..n).collect(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Number of rows per class id.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows at `indices` (positions within this dataset), keeping class names.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            row_ids: indices.iter().map(|&i| self.row_ids[i]).collect(),
        }
    }
}

/// Loads a CSV file whose `target` column holds class labels and whose other
/// columns are numeric features.
pub fn load_csv(path: impl AsRef<Path>, target: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(file, target)
}

/// Same as [`load_csv`] over any reader.
pub fn parse_csv<R: Read>(reader: R, target: &str) -> Result<Dataset> {
    let (headers, records) = read_records(reader)?;
    let target_col = headers
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| Error::MissingTarget(target.to_string()))?;
    if records.is_empty() {
        return Err(Error::EmptyData);
    }
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != target_col).collect();
    if feature_cols.is_empty() {
        return Err(Error::NoFeatures);
    }

    let d = feature_cols.len();
    let mut values = Vec::with_capacity(records.len() * d);
    let mut labels = Vec::with_capacity(records.len());
    let mut class_names: Vec<String> = Vec::new();
    let mut class_ids: HashMap<String, usize> = HashMap::new();
    for (r, record) in records.iter().enumerate() {
        for &c in &feature_cols {
            values.push(parse_cell(&record[c], r + 1, &headers[c])?);
        }
        let label = &record[target_col];
        let id = *class_ids.entry(label.to_string()).or_insert_with(|| {
            class_names.push(label.to_string());
            class_names.len() - 1
        });
        labels.push(id);
    }

    let features = Array2::from_shape_vec((records.len(), d), values)
        .expect("row-major buffer matches shape");
    let feature_names = feature_cols.iter().map(|&c| headers[c].clone()).collect();
    Dataset::new(features, labels, feature_names, class_names)
}

/// Reads the numeric feature columns of a prediction input.
///
/// After dropping `target` (when given and present), the header must equal
/// `expected_names` in order. Zero data rows is allowed.
pub fn read_feature_table<R: Read>(
    reader: R,
    expected_names: &[String],
    target: Option<&str>,
) -> Result<Array2<f64>> {
    let (headers, records) = read_records(reader)?;
    let keep: Vec<usize> = (0..headers.len())
        .filter(|&c| target != Some(headers[c].as_str()))
        .collect();
    let got: Vec<String> = keep.iter().map(|&c| headers[c].clone()).collect();
    if got != expected_names {
        return Err(Error::FeatureNameMismatch {
            expected: expected_names.to_vec(),
            got,
        });
    }
    let mut values = Vec::with_capacity(records.len() * keep.len());
    for (r, record) in records.iter().enumerate() {
        for &c in &keep {
            values.push(parse_cell(&record[c], r + 1, &headers[c])?);
        }
    }
    Ok(Array2::from_shape_vec((records.len(), keep.len()), values)
        .expect("row-major buffer matches shape"))
}

fn read_records<R: Read>(reader: R) -> Result<(Vec<String>, Vec<csv::StringRecord>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let records = rdr.records().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((headers, records))
}

fn parse_cell(cell: &str, row: usize, column: &str) -> Result<f64> {
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::NonNumeric {
            row,
            column: column.to_string(),
            value: cell.to_string(),
        }),
    }
}

/// Parameters of a train/test split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

/// Row positions of a stratified train/test partition, both sorted ascending.
///
/// Each class with at least two rows contributes `round(n_c * fraction)` test
/// rows, clamped to `[1, n_c - 1]`; single-row classes stay in training.
pub fn split_indices(labels: &[usize], spec: SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = labels.len();
    let too_small = Error::TooSmallToSplit {
        n,
        fraction: spec.test_fraction,
    };
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(too_small);
    }
    let n_test = (n as f64 * spec.test_fraction).ceil() as usize;
    if n_test < 1 || n < n_test + 1 {
        return Err(too_small);
    }

    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::with_capacity(n);
    let mut test = Vec::with_capacity(n_test);
    for mut rows in by_class {
        let n_c = rows.len();
        if n_c < 2 {
            train.extend(rows);
            continue;
        }
        rows.shuffle(&mut rng);
        let k = ((n_c as f64 * spec.test_fraction).round() as usize).clamp(1, n_c - 1);
        test.extend_from_slice(&rows[..k]);
        train.extend_from_slice(&rows[k..]);
    }
    if test.is_empty() {
        return Err(too_small);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Stratified, seeded train/test split.
pub fn train_test_split(data: &Dataset, spec: SplitSpec) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(&data.labels, spec)?;
    Ok((data.subset(&train), data.subset(&test)))
}

/// Per-column z-scoring fitted on training rows.
///
/// Uses the population standard deviation; constant columns store a std of 1
/// so they map to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(features: ArrayView2<f64>) -> Self {
        let n = features.nrows().max(1) as f64;
        let mut means = Vec::with_capacity(features.ncols());
        let mut stds = Vec::with_capacity(features.ncols());
        for col in features.columns() {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            means.push(mean);
            // relative test: a column like [0.1; n] has rounding-level spread
            stds.push(if std > 1e-12 * mean.abs().max(1.0) { std } else { 1.0 });
        }
        Self { means, stds }
    }

    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(features.ncols())?;
        let mut out = features.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.means[j], self.stds[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        Ok(out)
    }

    pub fn apply_row(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check(x.len())?;
        Ok(Array1::from_iter(
            x.iter()
                .zip(self.means.iter().zip(&self.stds))
                .map(|(v, (m, s))| (v - m) / s),
        ))
    }

    pub fn invert(&self, standardized: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(standardized.ncols())?;
        let mut out = standardized.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.means[j], self.stds[j]);
            col.mapv_inplace(|v| v * s + m);
        }
        Ok(out)
    }

    fn check(&self, d: usize) -> Result<()> {
        if d != self.means.len() {
            return Err(Error::DimensionMismatch {
                expected: self.means.len(),
                got: d,
            });
        }
        Ok(())
    }
}

pub fn standardize_fit(features: ArrayView2<f64>) -> Standardizer {
    Standardizer::fit(features)
}

pub fn standardize_apply(s: &Standardizer, features: ArrayView2<f64>) -> Result<Array2<f64>> {
    s.apply(features)
}

/// One-vs-rest labels: +1 for `positive_class`, -1 otherwise.
pub fn binarize_labels(data: &Dataset, positive_class: usize) -> Result<Vec<f64>> {
    if positive_class >= data.n_classes() {
        return Err(Error::UnknownClass {
            class: positive_class,
            n_classes: data.n_classes(),
        });
    }
    Ok(data
        .labels
        .iter()
        .map(|&l| if l == positive_class { 1.0 } else { -1.0 })
        .collect())
}
