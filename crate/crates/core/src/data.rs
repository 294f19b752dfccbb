//! Column-named numeric dataset with aligned labels and row keys.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Binary class label. `Benign` encodes as 0, `Malicious` as 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Benign,
    Malicious,
}

/// Number of classes.
pub const CLASS_COUNT: usize = 2;

impl Label {
    pub fn index(self) -> usize {
        match self {
            Label::Benign => 0,
            Label::Malicious => 1,
        }
    }

    pub fn from_index(index: usize) -> Label {
        match index {
            0 => Label::Benign,
            _ => Label::Malicious,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Benign => f.write_str("benign"),
            Label::Malicious => f.write_str("malicious"),
        }
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "benign" => Ok(Label::Benign),
            "malicious" => Ok(Label::Malicious),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// Identifies the host-window a row was extracted from.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowKey {
    pub host: String,
    pub window_start: i64,
}

impl RowKey {
    pub fn new(host: impl Into<String>, window_start: i64) -> Self {
        RowKey { host: host.into(), window_start }
    }
}

/// M×N numeric matrix with named columns, optional labels and per-row keys.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T> {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<T>>,
    pub labels: Option<Vec<Label>>,
    pub row_keys: Vec<RowKey>,
}

impl<T: Scalar> Dataset<T> {
    /// Builds a dataset and checks its shape invariants.
    pub fn new(
        feature_names: Vec<String>,
        rows: Vec<Vec<T>>,
        labels: Option<Vec<Label>>,
        row_keys: Vec<RowKey>,
    ) -> Result<Self> {
        let d = Dataset { feature_names, rows, labels, row_keys };
        d.validate()?;
        Ok(d)
    }

    /// Convenience constructor for tests and toy data: keys are generated,
    /// columns are named `f0..fN`.
    pub fn from_rows(rows: Vec<Vec<T>>, labels: Option<Vec<Label>>) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        let feature_names = (0..n).map(|j| format!("f{j}")).collect();
        let row_keys = (0..rows.len()).map(|i| RowKey::new("row", i as i64)).collect();
        Dataset::new(feature_names, rows, labels, row_keys)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.feature_names.len();
        if self.row_keys.len() != self.rows.len() {
            return Err(Error::InvalidInput(format!(
                "row_keys length {} does not match row count {}",
                self.row_keys.len(),
                self.rows.len()
            )));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.rows.len() {
                return Err(Error::InvalidInput(format!(
                    "labels length {} does not match row count {}",
                    labels.len(),
                    self.rows.len()
                )));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} values, expected {n}",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "row {i}, column {:?}: non-finite value",
                    self.feature_names[j]
                )));
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Copy of column `j`.
    pub fn column(&self, j: usize) -> Vec<T> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Labels, or an error for unlabeled datasets.
    pub fn labels_required(&self) -> Result<&[Label]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::InvalidInput("dataset is unlabeled".into()))
    }

    /// Per-class row counts, indexed by `Label::index`.
    pub fn class_counts(&self) -> Result<[usize; CLASS_COUNT]> {
        let mut counts = [0usize; CLASS_COUNT];
        for label in self.labels_required()? {
            counts[label.index()] += 1;
        }
        Ok(counts)
    }

    /// New dataset containing the given rows, in the given order.
    pub fn take_rows(&self, indices: &[usize]) -> Dataset<T> {
        Dataset {
            feature_names: self.feature_names.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|ls| indices.iter().map(|&i| ls[i]).collect()),
            row_keys: indices.iter().map(|&i| self.row_keys[i].clone()).collect(),
        }
    }

    /// New dataset restricted to the given columns, in the given order.
    pub fn take_columns(&self, columns: &[usize]) -> Dataset<T> {
        Dataset {
            feature_names: columns.iter().map(|&j| self.feature_names[j].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| columns.iter().map(|&j| r[j]).collect())
                .collect(),
            labels: self.labels.clone(),
            row_keys: self.row_keys.clone(),
        }
    }

    /// Restricts the dataset to named columns, erroring on unknown names.
    pub fn project(&self, names: &[String]) -> Result<Dataset<T>> {
        let columns = names
            .iter()
            .map(|name| {
                self.feature_names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| Error::InvalidInput(format!("dataset has no feature {name:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.take_columns(&columns))
    }
}

/// Header prefix and suffix around the feature names in dataset CSV files.
const KEY_COLUMNS: [&str; 2] = ["host", "window_start"];
const LABEL_COLUMN: &str = "label";

/// Reads a dataset CSV: `host,window_start,<feature names...>,label`.
///
/// The label column is all-or-nothing: either every row carries
/// `benign`/`malicious` or every row leaves it empty.
pub fn load_dataset<T: Scalar, R: BufRead>(reader: R) -> Result<Dataset<T>> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::DatasetFormat { line: 1, msg: "empty file, header expected".into() })?;
    let header = header?;
    let fields: Vec<&str> = header.split(',').collect();
    if fields.len() < 4
        || fields[0] != KEY_COLUMNS[0]
        || fields[1] != KEY_COLUMNS[1]
        || fields[fields.len() - 1] != LABEL_COLUMN
    {
        return Err(Error::DatasetFormat {
            line: 1,
            msg: format!(
                "header must be `host,window_start,<features...>,label`, got {header:?}"
            ),
        });
    }
    let feature_names: Vec<String> =
        fields[2..fields.len() - 1].iter().map(|s| s.to_string()).collect();
    let n = feature_names.len();

    let mut rows = Vec::new();
    let mut labels: Vec<Label> = Vec::new();
    let mut row_keys = Vec::new();
    let mut unlabeled = false;

    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != n + 3 {
            return Err(Error::DatasetFormat {
                line: line_no,
                msg: format!("expected {} fields, got {}", n + 3, parts.len()),
            });
        }
        let host = parts[0].to_string();
        let window_start: i64 = parts[1].parse().map_err(|_| Error::DatasetFormat {
            line: line_no,
            msg: format!("window_start is not an integer: {:?}", parts[1]),
        })?;
        let mut row = Vec::with_capacity(n);
        for (j, raw) in parts[2..2 + n].iter().enumerate() {
            let value: f64 = raw.parse().map_err(|_| Error::DatasetFormat {
                line: line_no,
                msg: format!("column {:?} is not a number: {raw:?}", feature_names[j]),
            })?;
            if !value.is_finite() {
                return Err(Error::DatasetFormat {
                    line: line_no,
                    msg: format!("column {:?} is not finite: {raw:?}", feature_names[j]),
                });
            }
            row.push(T::from_f64_lossy(value));
        }
        let label_field = parts[n + 2];
        if label_field.is_empty() {
            unlabeled = true;
        } else {
            let label = label_field.parse().map_err(|e| Error::DatasetFormat {
                line: line_no,
                msg: e,
            })?;
            labels.push(label);
        }
        if unlabeled && !labels.is_empty() {
            return Err(Error::DatasetFormat {
                line: line_no,
                msg: "mixed labeled and unlabeled rows".into(),
            });
        }
        rows.push(row);
        row_keys.push(RowKey::new(host, window_start));
    }

    let labels = if unlabeled { None } else { Some(labels) };
    if let Some(ls) = &labels {
        // catches a labeled prefix followed by empty labels
        if ls.len() != rows.len() {
            return Err(Error::DatasetFormat {
                line: rows.len() + 1,
                msg: "mixed labeled and unlabeled rows".into(),
            });
        }
    }
    Dataset::new(feature_names, rows, labels, row_keys)
}

/// Writes a dataset in the CSV format accepted by [`load_dataset`].
///
/// Values are written with Rust's shortest round-trip float formatting, so
/// reloading reproduces them exactly.
pub fn write_dataset<T: Scalar, W: Write>(dataset: &Dataset<T>, mut writer: W) -> Result<()> {
    dataset.validate()?;
    let mut header = String::from("host,window_start");
    for name in &dataset.feature_names {
        header.push(',');
        header.push_str(name);
    }
    header.push_str(",label");
    writeln!(writer, "{header}")?;
    for (i, row) in dataset.rows.iter().enumerate() {
        let key = &dataset.row_keys[i];
        write!(writer, "{},{}", key.host, key.window_start)?;
        for value in row {
            write!(writer, ",{value}")?;
        }
        match &dataset.labels {
            Some(labels) => writeln!(writer, ",{}", labels[i])?,
            None => writeln!(writer, ",")?,
        }
    }
    Ok(())
}
