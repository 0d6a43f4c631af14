//! Dataset representation, CSV ingestion, cleaning, normalization, splitting,
//! and the synthetic benchmark generator.

use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::seeding;

/// A fixed design matrix with binary labels.
///
/// Rows are samples, columns are features. Labels are 0/1. Values are
/// immutable after construction; sharing across threads is safe.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    labels: Vec<u8>,
    feature_names: Vec<String>,
    name: String,
}

impl Dataset {
    /// Build a dataset, validating shape, finiteness, and label values.
    pub fn new(
        features: DMatrix<f64>,
        labels: Vec<u8>,
        feature_names: Vec<String>,
        name: impl Into<String>,
    ) -> Result<Self> {
        let (n, d) = features.shape();
        if n == 0 || d == 0 {
            return Err(Error::EmptyInput);
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
        if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::InvalidParameter(format!(
                "labels must be 0 or 1, got {bad}"
            )));
        }
        if !features.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter(
                "features contain non-finite values".into(),
            ));
        }
        Ok(Self {
            features,
            labels,
            feature_names,
            name: name.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// (negatives, positives) label counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&y| y == 1).count();
        (self.n() - pos, pos)
    }

    /// True when both classes are present.
    pub fn has_both_classes(&self) -> bool {
        let (neg, pos) = self.class_counts();
        neg > 0 && pos > 0
    }

    /// New dataset holding the given rows, in order.
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        let d = self.dim();
        let features = DMatrix::from_fn(rows.len(), d, |r, c| self.features[(rows[r], c)]);
        let labels = rows.iter().map(|&i| self.labels[i]).collect();
        Dataset::new(features, labels, self.feature_names.clone(), self.name.clone())
    }
}

/// A train/test partition together with the seed that produced it.
#[derive(Debug, Clone)]
pub struct SplitPair {
    pub train: Dataset,
    pub test: Dataset,
    pub seed: u64,
}

/// Per-column location/scale fitted on training data.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationStats {
    pub means: Vec<f64>,
    /// Sample standard deviation (divisor n-1). Zero for constant columns.
    pub stddevs: Vec<f64>,
    /// Columns whose training values were all identical; these divide by 1
    /// on application and therefore map to all zeros.
    pub constant: Vec<bool>,
}

/// One row of the synthetic benchmark table: a true coefficient vector and
/// the positive-class ratio it induces.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSetting {
    pub beta_true: [f64; 10],
    pub expected_positive_ratio: f64,
    /// 1-6 for the built-in settings, 0 for custom coefficients.
    pub id: u8,
}

const SYNTHETIC_TABLE: [([f64; 10], f64); 6] = [
    ([-1., 1., 0., 0., 0., 0., 0., 0., 0., 0.], 0.29),
    ([-1., 0., -1., -1., 1., -2., 0., 0., 0., 0.], 0.37),
    ([1., 0., 0., 0., 0., 0., 0., -1., 2., 0.], 0.64),
    ([0., 0., 0., -1., 2., 0., 0., 0., 0., 0.], 0.50),
    ([-4., 0., 0., 0., 2., 0., 0., 0., 0., 0.], 0.06),
    ([4., 0., 0., 3., 0., 0., 0., 0., 0., 0.], 0.88),
];

impl SyntheticSetting {
    /// Look up one of the six built-in settings.
    pub fn by_id(id: u8) -> Result<Self> {
        if !(1..=6).contains(&id) {
            return Err(Error::InvalidParameter(format!(
                "synthetic setting id must be 1-6, got {id}"
            )));
        }
        let (beta_true, ratio) = SYNTHETIC_TABLE[id as usize - 1];
        Ok(Self {
            beta_true,
            expected_positive_ratio: ratio,
            id,
        })
    }

    /// A setting with user-supplied coefficients (id 0).
    pub fn custom(beta_true: [f64; 10], expected_positive_ratio: f64) -> Self {
        Self {
            beta_true,
            expected_positive_ratio,
            id: 0,
        }
    }
}

fn is_na_token(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t == "NA" || t == "?" || t.eq_ignore_ascii_case("nan")
}

/// Load a binary-labelled dataset from a headed CSV file.
///
/// Rows containing any missing cell (empty, `NA`, `?`, or `nan` in any case)
/// are dropped and the drop count is logged. The label column is mapped to 1
/// where it equals `positive_label` and to 0 for every other value.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str, positive_label: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::UnknownLabelColumn(label_column.to_string()))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();

    let mut rows: Vec<f64> = Vec::new();
    let mut labels: Vec<u8> = Vec::new();
    let mut dropped = 0usize;
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        if record.iter().any(is_na_token) {
            dropped += 1;
            continue;
        }
        for (i, cell) in record.iter().enumerate() {
            if i == label_idx {
                continue;
            }
            let value: f64 = cell.trim().parse().map_err(|_| Error::BadFeatureValue {
                value: cell.to_string(),
                column: headers.get(i).unwrap_or("").to_string(),
                row: row_no + 2, // 1-based, plus header
            })?;
            rows.push(value);
        }
        labels.push(u8::from(record.get(label_idx).map(str::trim) == Some(positive_label)));
    }
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} row(s) with missing values", path.display());
    }
    if labels.is_empty() {
        return Err(Error::EmptyAfterCleaning);
    }
    let d = feature_names.len();
    let features = DMatrix::from_row_slice(labels.len(), d, &rows);
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".to_string());
    Dataset::new(features, labels, feature_names, name)
}

/// Fit per-column mean and sample standard deviation on training data.
pub fn fit_normalizer(train: &Dataset) -> Result<NormalizationStats> {
    let n = train.n();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let d = train.dim();
    let mut means = Vec::with_capacity(d);
    let mut stddevs = Vec::with_capacity(d);
    let mut constant = Vec::with_capacity(d);
    for c in 0..d {
        let col = train.features().column(c);
        let mean = col.sum() / n as f64;
        let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
        let sd = (ss / (n as f64 - 1.0)).sqrt();
        means.push(mean);
        stddevs.push(sd);
        constant.push(sd == 0.0);
    }
    Ok(NormalizationStats {
        means,
        stddevs,
        constant,
    })
}

/// Apply `(x - mean) / stddev` column-wise; constant columns divide by 1 and
/// become all zeros. Labels are untouched.
pub fn apply_normalizer(stats: &NormalizationStats, data: &Dataset) -> Result<Dataset> {
    let d = data.dim();
    if stats.means.len() != d {
        return Err(Error::DimensionMismatch {
            expected: stats.means.len(),
            got: d,
        });
    }
    let features = DMatrix::from_fn(data.n(), d, |r, c| {
        let scale = if stats.constant[c] { 1.0 } else { stats.stddevs[c] };
        (data.features()[(r, c)] - stats.means[c]) / scale
    });
    Dataset::new(
        features,
        data.labels().to_vec(),
        data.feature_names().to_vec(),
        data.name(),
    )
}

/// Random train/test split with `round(n * train_fraction)` training rows.
///
/// Deterministic for a given seed. A single-class training side is legal but
/// logged, since most fitting routines will reject it.
pub fn split(data: &Dataset, train_fraction: f64, seed: u64) -> Result<SplitPair> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train_fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let n = data.n();
    let n_train = (n as f64 * train_fraction).round() as usize;
    if n_train == 0 {
        return Err(Error::EmptySplit("train"));
    }
    if n_train == n {
        return Err(Error::EmptySplit("test"));
    }
    let perm = permutation(n, seed);
    let train = data.subset(&perm[..n_train])?;
    let test = data.subset(&perm[n_train..])?;
    if !train.has_both_classes() {
        log::warn!(
            "split of {:?} (seed {seed}) produced a single-class training side",
            data.name()
        );
    }
    Ok(SplitPair { train, test, seed })
}

/// Disjoint index sets covering `0..n`, sizes differing by at most one.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > n {
        return Err(Error::BadFoldCount { k, n });
    }
    let perm = permutation(n, seed);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(perm[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = seeding::rng(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    // Fisher-Yates
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Draw a synthetic dataset: the first column is the constant 1 (the table's
/// leading coefficient acts as an intercept), the remaining nine columns are
/// standard normal, and labels are Bernoulli with p = sigmoid(beta' x).
pub fn generate_synthetic(setting: &SyntheticSetting, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let d = 10usize;
    let mut rng = seeding::rng(seed);
    let mut features = DMatrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    for r in 0..n {
        features[(r, 0)] = 1.0;
        for c in 1..d {
            features[(r, c)] = StandardNormal.sample(&mut rng);
        }
        let z: f64 = (0..d).map(|c| setting.beta_true[c] * features[(r, c)]).sum();
        let p = sigmoid(z);
        labels.push(u8::from(rng.random_range(0.0..1.0) < p));
    }
    let feature_names = (1..=d).map(|i| format!("x{i}")).collect();
    let name = if setting.id == 0 {
        "synthetic-custom".to_string()
    } else {
        format!("setting-{}", setting.id)
    };
    Dataset::new(features, labels, feature_names, name)
}
