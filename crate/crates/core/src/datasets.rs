//! Dataset ingestion, binarization, stratified splitting and z-scoring.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{seeded_rng, Error, Result};

/// Smallest standard deviation stored in [`NormalizationParams`].
pub const MIN_STD: f64 = 1e-12;

/// Which column holds the class label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl Default for LabelColumn {
    fn default() -> Self {
        LabelColumn::Name("last".into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvOptions {
    pub has_header: bool,
    /// `Name("last")` selects the final column.
    pub label_column: LabelColumn,
    pub delimiter: char,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            has_header: true,
            label_column: LabelColumn::default(),
            delimiter: ',',
        }
    }
}

/// Parsed CSV: numeric features plus the raw label strings.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTable {
    pub feature_names: Vec<String>,
    pub features: Array2<f64>,
    pub labels: Vec<String>,
}

impl RawTable {
    pub fn label_counts(&self) -> BTreeMap<&str, usize> {
        let mut counts = BTreeMap::new();
        for l in &self.labels {
            *counts.entry(l.as_str()).or_insert(0) += 1;
        }
        counts
    }
}

/// Loads a delimited file. Lines starting with `@` (KEEL metadata) are
/// skipped. Rows are 1-based in error messages, counting data rows only;
/// columns are 1-based file columns.
pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<RawTable> {
    let path = path.as_ref();
    let text = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, path, options)
}

pub(crate) fn parse_csv(bytes: &[u8], path: &Path, options: &CsvOptions) -> Result<RawTable> {
    if !options.delimiter.is_ascii() {
        return Err(Error::Config(format!("delimiter {:?} is not ASCII", options.delimiter)));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(options.delimiter as u8)
        .comment(Some(b'@'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);

    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row: e.position().map_or(0, |p| p.record() as usize + 1),
            column: 0,
            message: e.to_string(),
        })?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        records.push(rec);
    }
    let header = if options.has_header && !records.is_empty() {
        Some(records.remove(0))
    } else {
        None
    };
    let width = header
        .as_ref()
        .or(records.first())
        .map(|r| r.len())
        .ok_or_else(|| Error::InsufficientData(format!("{} contains no rows", path.display())))?;
    if width < 2 {
        return Err(Error::Config(format!("{}: need at least one feature and a label column", path.display())));
    }

    let label_idx = match &options.label_column {
        LabelColumn::Index(i) if *i < width => *i,
        LabelColumn::Index(i) => {
            return Err(Error::Config(format!("label column {i} out of range (width {width})")))
        }
        LabelColumn::Name(n) if n == "last" && !header.as_ref().is_some_and(|h| h.iter().any(|c| c == "last")) => width - 1,
        LabelColumn::Name(n) => header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == n))
            .ok_or_else(|| Error::Config(format!("label column {n:?} not found in header")))?,
    };

    let feature_names: Vec<String> = (0..width)
        .filter(|&c| c != label_idx)
        .map(|c| match &header {
            Some(h) => h[c].to_string(),
            None => format!("x{}", c + 1),
        })
        .collect();

    let mut flat = Vec::with_capacity(records.len() * (width - 1));
    let mut labels = Vec::with_capacity(records.len());
    for (r, rec) in records.iter().enumerate() {
        let row = r + 1;
        if rec.len() != width {
            return Err(Error::RaggedRows {
                path: path.to_path_buf(),
                row,
                expected: width,
                found: rec.len(),
            });
        }
        for (c, cell) in rec.iter().enumerate() {
            if c == label_idx {
                labels.push(cell.to_string());
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row,
                column: c + 1,
                message: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row,
                    column: c + 1,
                    message: format!("non-finite value {cell:?}"),
                });
            }
            flat.push(v);
        }
    }
    let features = Array2::from_shape_vec((labels.len(), width - 1), flat).expect("rectangular by construction");
    Ok(RawTable {
        feature_names,
        features,
        labels,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Minority,
    Majority,
}

impl Class {
    pub fn is_minority(self) -> bool {
        self == Class::Minority
    }
}

/// A binary dataset. Row order is meaningful (it breaks k-NN distance ties).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub feature_names: Vec<String>,
    pub features: Array2<f64>,
    pub labels: Vec<Class>,
    /// Label written for minority rows.
    pub minority_name: String,
    /// Label written for majority rows.
    pub majority_name: String,
}

impl Dataset {
    pub fn new(name: impl Into<String>, features: Array2<f64>, labels: Vec<Class>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::LengthMismatch {
                left: features.nrows(),
                right: labels.len(),
            });
        }
        if let Some(((r, c), v)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { row: r, column: c, value: *v });
        }
        let feature_names = (1..=features.ncols()).map(|i| format!("x{i}")).collect();
        Ok(Dataset {
            name: name.into(),
            feature_names,
            features,
            labels,
            minority_name: "1".into(),
            majority_name: "0".into(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn indices_of(&self, class: Class) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == class).collect()
    }

    pub fn count(&self, class: Class) -> usize {
        self.labels.iter().filter(|&&c| c == class).count()
    }

    pub fn class_rows(&self, class: Class) -> Array2<f64> {
        self.features.select(Axis(0), &self.indices_of(class))
    }

    /// Rows `idx` in the given order, keeping names and metadata.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            feature_names: self.feature_names.clone(),
            features: self.features.select(Axis(0), idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            minority_name: self.minority_name.clone(),
            majority_name: self.majority_name.clone(),
        }
    }

    /// Same metadata with `rows` appended, all labelled `class`.
    pub fn appended(&self, rows: ArrayView2<f64>, class: Class) -> Result<Dataset> {
        if rows.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: rows.ncols(),
            });
        }
        let features = ndarray::concatenate(Axis(0), &[self.features.view(), rows]).expect("same width");
        let mut labels = self.labels.clone();
        labels.extend(std::iter::repeat_n(class, rows.nrows()));
        Ok(Dataset {
            features,
            labels,
            ..self.clone()
        })
    }

    pub fn with_features(&self, features: Array2<f64>) -> Dataset {
        assert_eq!(features.dim(), self.features.dim());
        Dataset {
            features,
            ..self.clone()
        }
    }

    /// Writes features followed by a `class` column.
    pub fn write_csv(&self, path: impl AsRef<Path>, delimiter: char) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(std::io::BufWriter::new(file), delimiter)
            .map_err(|e| Error::io(path, e))
    }

    pub fn write_csv_to<W: Write>(&self, writer: W, delimiter: char) -> std::io::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .delimiter(delimiter as u8)
            .from_writer(writer);
        let mut header = self.feature_names.clone();
        header.push("class".into());
        w.write_record(&header)?;
        for (row, label) in self.features.rows().into_iter().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            rec.push(match label {
                Class::Minority => self.minority_name.clone(),
                Class::Majority => self.majority_name.clone(),
            });
            w.write_record(&rec)?;
        }
        w.flush()
    }
}

/// Turns a (possibly multi-class) table into a minority/majority dataset.
/// Rows labelled with any of `positive_labels` form the minority, which must
/// be strictly smaller than the rest.
pub fn binarize(table: &RawTable, name: &str, positive_labels: &[String]) -> Result<Dataset> {
    if positive_labels.is_empty() {
        return Err(Error::Config("positive_labels must not be empty".into()));
    }
    let present: BTreeSet<&str> = table.labels.iter().map(String::as_str).collect();
    if let Some(missing) = positive_labels.iter().find(|l| !present.contains(l.as_str())) {
        return Err(Error::UnknownLabel(missing.clone()));
    }
    let positive: BTreeSet<&str> = positive_labels.iter().map(String::as_str).collect();
    let labels: Vec<Class> = table
        .labels
        .iter()
        .map(|l| {
            if positive.contains(l.as_str()) {
                Class::Minority
            } else {
                Class::Majority
            }
        })
        .collect();
    let pos = labels.iter().filter(|c| c.is_minority()).count();
    let neg = labels.len() - pos;
    if pos >= neg {
        return Err(Error::NotMinority {
            positive: pos,
            negative: neg,
        });
    }
    let negative: Vec<&str> = present.difference(&positive).copied().collect();
    Ok(Dataset {
        name: name.to_string(),
        feature_names: table.feature_names.clone(),
        features: table.features.clone(),
        labels,
        minority_name: positive.iter().copied().collect::<Vec<_>>().join("+"),
        majority_name: if negative.len() == 1 {
            negative[0].to_string()
        } else {
            "rest".into()
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.7,
            seed: 0,
        }
    }
}

/// Train/test partition with the original row indices of each side.
#[derive(Clone, Debug)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

/// Ratio-preserving split: each class is shuffled independently and
/// `round(train_fraction * class_size)` of its rows go to training. Both
/// sides keep the original row order.
pub fn stratified_split(dataset: &Dataset, spec: &SplitSpec) -> Result<Split> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::Config(format!("train_fraction {} not in (0, 1)", spec.train_fraction)));
    }
    let mut rng = seeded_rng(spec.seed, 2);
    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    for class in [Class::Minority, Class::Majority] {
        let mut idx = dataset.indices_of(class);
        let name = format!("{class:?}").to_lowercase();
        if idx.len() < 2 {
            return Err(Error::TooSmall {
                class: name,
                count: idx.len(),
                required: 2,
            });
        }
        idx.shuffle(&mut rng);
        let n_train = (spec.train_fraction * idx.len() as f64).round() as usize;
        if n_train == 0 || n_train == idx.len() {
            return Err(Error::TooSmall {
                class: name,
                count: idx.len(),
                required: 2,
            });
        }
        train_rows.extend_from_slice(&idx[..n_train]);
        test_rows.extend_from_slice(&idx[n_train..]);
    }
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    Ok(Split {
        train: dataset.subset(&train_rows),
        test: dataset.subset(&test_rows),
        train_rows,
        test_rows,
    })
}

/// Per-feature mean and population standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl NormalizationParams {
    /// Fits on training rows only. Constant features get `std = MIN_STD`.
    pub fn fit(train: ArrayView2<f64>) -> Result<Self> {
        if train.nrows() == 0 {
            return Err(Error::InsufficientData("cannot fit normalization on zero rows".into()));
        }
        let mean = train.mean_axis(Axis(0)).expect("nonempty");
        let std = train.std_axis(Axis(0), 0.0).mapv(|s| s.max(MIN_STD));
        Ok(NormalizationParams { mean, std })
    }

    pub fn apply(&self, features: ArrayView2<f64>) -> Array2<f64> {
        (&features - &self.mean) / &self.std
    }

    pub fn invert(&self, features: ArrayView2<f64>) -> Array2<f64> {
        &features * &self.std + &self.mean
    }
}

pub fn zscore_fit(train: &Dataset) -> Result<NormalizationParams> {
    NormalizationParams::fit(train.features.view())
}

/// Two isotropic Gaussian classes in `dim` dimensions: the majority centred
/// at the origin, the minority at `separation` along the first axis.
/// Majority rows come first.
pub fn two_gaussians(n_majority: usize, n_minority: usize, dim: usize, separation: f64, seed: u64) -> Dataset {
    let mut rng = seeded_rng(seed, 3);
    let n = n_majority + n_minority;
    let mut features = Array2::from_shape_fn((n, dim), |_| StandardNormal.sample(&mut rng));
    for mut row in features.rows_mut().into_iter().skip(n_majority) {
        row[0] += separation;
    }
    let mut labels = vec![Class::Majority; n_majority];
    labels.extend(std::iter::repeat_n(Class::Minority, n_minority));
    Dataset::new("two-gaussians", features, labels).expect("finite by construction")
}
