//! Labeled feature matrices, CSV ingestion and stratified resampling.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// A dense feature matrix with one class label per row.
///
/// Labels are dense indices into `class_names`; every class has at least one
/// sample and there are at least two classes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl LabeledDataset {
    /// Builds a dataset from row-major features and dense labels.
    pub fn new(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::InvalidArgument("at least one feature is required".into()));
        }
        if !features.len().is_multiple_of(n_features) {
            return Err(Error::LengthMismatch {
                left: features.len(),
                right: n_features,
            });
        }
        let n = features.len() / n_features;
        if labels.len() != n {
            return Err(Error::LengthMismatch {
                left: labels.len(),
                right: n,
            });
        }
        if n < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 samples, got {n}")));
        }
        if class_names.len() < 2 {
            return Err(Error::FewerThanTwoClasses);
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / n_features,
                column: pos % n_features,
            });
        }
        let mut counts = vec![0usize; class_names.len()];
        for &y in &labels {
            let slot = counts.get_mut(y).ok_or_else(|| {
                Error::InvalidArgument(format!("label {y} out of range for {} classes", class_names.len()))
            })?;
            *slot += 1;
        }
        if let Some(k) = counts.iter().position(|&c| c == 0) {
            return Err(Error::ClassTooSmall {
                class: class_names[k].clone(),
                count: 0,
                required: 1,
            });
        }
        Ok(Self {
            features,
            n_features,
            labels,
            class_names,
        })
    }

    /// Builds a dataset from arbitrary label values, encoding classes in order
    /// of first appearance.
    pub fn from_raw_labels<L>(features: Vec<f64>, n_features: usize, raw: &[L]) -> Result<Self>
    where
        L: Eq + Hash + fmt::Display,
    {
        let mut index: HashMap<&L, usize> = HashMap::new();
        let mut names = Vec::new();
        let labels = raw
            .iter()
            .map(|l| {
                *index.entry(l).or_insert_with(|| {
                    names.push(l.to_string());
                    names.len() - 1
                })
            })
            .collect();
        Self::new(features, n_features, labels, names)
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Row-major feature storage.
    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_name(&self, class: usize) -> &str {
        &self.class_names[class]
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Empirical priors `n_k / n`.
    pub fn priors(&self) -> Vec<f64> {
        let n = self.n_samples() as f64;
        self.class_counts().into_iter().map(|c| c as f64 / n).collect()
    }

    pub fn indices_of(&self, class: usize) -> Vec<usize> {
        (0..self.n_samples()).filter(|&i| self.labels[i] == class).collect()
    }

    /// Rows at `indices`, keeping the full class set. Every class must still
    /// be represented.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self::new(features, self.n_features, labels, self.class_names.clone())
    }

    /// Rows whose class is in `classes`, re-encoded so that `classes[j]`
    /// becomes class `j`.
    pub fn restrict_to_classes(&self, classes: &[usize]) -> Result<Self> {
        let mut remap = vec![None; self.n_classes()];
        for (j, &c) in classes.iter().enumerate() {
            if c >= self.n_classes() {
                return Err(Error::UnknownClass(c.to_string()));
            }
            remap[c] = Some(j);
        }
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..self.n_samples() {
            if let Some(j) = remap[self.labels[i]] {
                features.extend_from_slice(self.row(i));
                labels.push(j);
            }
        }
        let names = classes.iter().map(|&c| self.class_names[c].clone()).collect();
        Self::new(features, self.n_features, labels, names)
    }

    /// Keeps only the given feature columns, in the given order.
    pub fn project(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.n_features) {
            return Err(Error::InvalidArgument(format!(
                "feature column {bad} out of range for {} features",
                self.n_features
            )));
        }
        let mut features = Vec::with_capacity(self.n_samples() * columns.len());
        for i in 0..self.n_samples() {
            let row = self.row(i);
            features.extend(columns.iter().map(|&c| row[c]));
        }
        Self::new(features, columns.len(), self.labels.clone(), self.class_names.clone())
    }

    /// Writes the dataset as CSV with a `f0,..,f{d-1},label` header.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file)).map_err(|e| match e {
            Error::Csv { message, .. } => Error::Csv {
                path: path.to_path_buf(),
                message,
            },
            Error::Io { source, .. } => Error::Io {
                path: path.to_path_buf(),
                source,
            },
            other => other,
        })
    }

    /// [`save_csv`](Self::save_csv) to any writer. Values use the shortest
    /// representation that parses back to the same float.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let sink = Path::new("<output>");
        let mut writer = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.n_features).map(|j| format!("f{j}")).collect();
        header.push("label".into());
        writer.write_record(&header).map_err(|e| csv_error(sink, e))?;
        for i in 0..self.n_samples() {
            let mut record: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            record.push(self.class_names[self.labels[i]].clone());
            writer.write_record(&record).map_err(|e| csv_error(sink, e))?;
        }
        writer.flush().map_err(|source| Error::Io {
            path: sink.to_path_buf(),
            source,
        })
    }
}

/// Which CSV column carries the class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelColumn::Index(i) => write!(f, "{i}"),
            LabelColumn::Name(n) => f.write_str(n),
        }
    }
}

impl Default for LabelColumn {
    fn default() -> Self {
        LabelColumn::Name("label".into())
    }
}

/// Numeric feature rows read from CSV, with the raw label strings when a
/// label column was requested.
#[derive(Debug, Clone)]
pub struct CsvFeatures {
    pub features: Vec<f64>,
    pub n_features: usize,
    pub labels: Option<Vec<String>>,
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Csv {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

/// Reads a CSV file. Row numbers in errors are 1-based file lines, columns
/// are 0-based.
///
/// The first line is a header when the label column is given by name, or
/// when any of its non-label cells fails to parse as a number.
pub fn read_feature_csv(path: impl AsRef<Path>, label: Option<&LabelColumn>) -> Result<CsvFeatures> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        });
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut records = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(records.len() + 1, |p| p.line() as usize);
        records.push((line, record));
    }
    if records.is_empty() {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            message: "no rows".into(),
        });
    }

    let width = records[0].1.len();
    let label_index = match label {
        None => None,
        Some(LabelColumn::Index(i)) => {
            if *i >= width {
                return Err(Error::MissingLabelColumn(i.to_string()));
            }
            Some(*i)
        }
        Some(LabelColumn::Name(name)) => Some(
            records[0]
                .1
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingLabelColumn(name.clone()))?,
        ),
    };
    let has_header = matches!(label, Some(LabelColumn::Name(_)))
        || records[0]
            .1
            .iter()
            .enumerate()
            .any(|(j, cell)| Some(j) != label_index && cell.parse::<f64>().is_err());

    let body = if has_header { &records[1..] } else { &records[..] };
    if body.is_empty() {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            message: "no data rows".into(),
        });
    }
    let n_features = width - usize::from(label_index.is_some());
    if n_features == 0 {
        return Err(Error::InvalidArgument("no feature columns".into()));
    }
    let mut features = Vec::with_capacity(body.len() * n_features);
    let mut labels = label_index.map(|_| Vec::with_capacity(body.len()));
    for (line, record) in body {
        if record.iter().all(|c| c.is_empty()) {
            return Err(Error::EmptyRow { row: *line });
        }
        for (j, cell) in record.iter().enumerate() {
            if Some(j) == label_index {
                if let Some(l) = labels.as_mut() {
                    l.push(cell.to_string());
                }
                continue;
            }
            let value: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                row: *line,
                column: j,
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFinite { row: *line, column: j });
            }
            features.push(value);
        }
    }
    Ok(CsvFeatures {
        features,
        n_features,
        labels,
    })
}

/// Loads a labeled dataset; labels are encoded in first-appearance order.
pub fn load_csv(path: impl AsRef<Path>, label: &LabelColumn) -> Result<LabeledDataset> {
    let table = read_feature_csv(path, Some(label))?;
    let raw = table.labels.unwrap_or_default();
    let distinct = raw.iter().collect::<std::collections::HashSet<_>>().len();
    if distinct < 2 {
        return Err(Error::FewerThanTwoClasses);
    }
    LabeledDataset::from_raw_labels(table.features, table.n_features, &raw)
}

/// Splits each class into a training and a test part, with
/// `round(train_fraction * n_k)` training samples per class (at least one
/// in each part).
pub fn stratified_split(
    ds: &LabeledDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..ds.n_classes() {
        let mut idx = ds.indices_of(class);
        if idx.len() < 2 {
            return Err(Error::ClassTooSmall {
                class: ds.class_name(class).to_string(),
                count: idx.len(),
                required: 2,
            });
        }
        idx.shuffle(&mut rng);
        let n_train = ((train_fraction * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.select(&train)?, ds.select(&test)?))
}

/// Fold index per sample for stratified k-fold cross-validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    fold_of: Vec<usize>,
    k: usize,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fold_of(&self) -> &[usize] {
        &self.fold_of
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratified k-fold assignment over a dataset.
pub fn kfold(ds: &LabeledDataset, k: usize, seed: u64) -> Result<FoldAssignment> {
    stratified_folds(ds.labels(), ds.n_classes(), k, seed)
}

/// Stratified k-fold assignment over a raw label vector.
///
/// Each class is shuffled and dealt round-robin, continuing the deal where
/// the previous class stopped, so per-class and total fold sizes both differ
/// by at most one.
pub fn stratified_folds(labels: &[usize], n_classes: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    let n = labels.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds sample count {n}")));
    }
    let mut by_class = vec![Vec::new(); n_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class
            .get_mut(y)
            .ok_or_else(|| Error::InvalidArgument(format!("label {y} out of range")))?
            .push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; n];
    let mut next = 0usize;
    for (class, idx) in by_class.iter_mut().enumerate() {
        if !idx.is_empty() && idx.len() < k {
            warn!("class {class} has {} samples, fewer than {k} folds", idx.len());
        }
        idx.shuffle(&mut rng);
        for &i in idx.iter() {
            fold_of[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldAssignment { fold_of, k })
}
