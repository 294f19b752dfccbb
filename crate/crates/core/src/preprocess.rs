//! Pre-processing stage: z-score normalization and SMOTE oversampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label, RowKey};
use crate::error::{Error, Result};
use crate::rng::{derive_rng, StreamId};
use crate::scalar::Scalar;

/// Per-column means and population standard deviations fitted on a training
/// split, stored in the model file so inference applies the same transform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams<T> {
    pub feature_names: Vec<String>,
    pub means: Vec<T>,
    pub stds: Vec<T>,
}

impl<T: Scalar> NormalizationParams<T> {
    /// Identity transform (mean 0, std 1) for data that is already scaled.
    pub fn identity(feature_names: Vec<String>) -> Self {
        let n = feature_names.len();
        NormalizationParams {
            feature_names,
            means: vec![T::zero(); n],
            stds: vec![T::one(); n],
        }
    }

    /// Restriction to a subset of the fitted columns, in the given order.
    pub fn project(&self, names: &[String]) -> Result<NormalizationParams<T>> {
        let mut means = Vec::with_capacity(names.len());
        let mut stds = Vec::with_capacity(names.len());
        for name in names {
            let j = self
                .feature_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| {
                    Error::InvalidInput(format!("normalization has no feature {name:?}"))
                })?;
            means.push(self.means[j]);
            stds.push(self.stds[j]);
        }
        Ok(NormalizationParams { feature_names: names.to_vec(), means, stds })
    }

    /// Normalizes a single raw row in place order.
    pub fn apply_row(&self, row: &[T]) -> Result<Vec<T>> {
        if row.len() != self.means.len() {
            return Err(Error::InvalidInput(format!(
                "row has {} values, normalization expects {}",
                row.len(),
                self.means.len()
            )));
        }
        Ok(row
            .iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(&x, (&mean, &std))| {
                if std == T::zero() {
                    T::zero()
                } else {
                    (x - mean) / std
                }
            })
            .collect())
    }
}

/// Fits per-column means and population standard deviations.
///
/// A column whose values are all equal gets std 0 exactly (and mean equal to
/// that value), so constant columns normalize to zeros instead of amplifying
/// rounding noise.
pub fn zscore_fit<T: Scalar>(dataset: &Dataset<T>) -> Result<NormalizationParams<T>> {
    let m = dataset.n_rows();
    if m == 0 {
        return Err(Error::InvalidInput("cannot fit normalization on an empty dataset".into()));
    }
    let n = dataset.n_features();
    let m_t = T::from_count(m);
    let mut means = Vec::with_capacity(n);
    let mut stds = Vec::with_capacity(n);
    for j in 0..n {
        let first = dataset.rows[0][j];
        if dataset.rows.iter().all(|r| r[j] == first) {
            means.push(first);
            stds.push(T::zero());
            continue;
        }
        let mean = dataset.rows.iter().map(|r| r[j]).sum::<T>() / m_t;
        let var = dataset
            .rows
            .iter()
            .map(|r| {
                let d = r[j] - mean;
                d * d
            })
            .sum::<T>()
            / m_t;
        means.push(mean);
        stds.push(var.sqrt());
    }
    Ok(NormalizationParams { feature_names: dataset.feature_names.clone(), means, stds })
}

/// Applies `(x - mean) / std` per column; zero-variance columns map to zero.
pub fn zscore_apply<T: Scalar>(
    dataset: &Dataset<T>,
    params: &NormalizationParams<T>,
) -> Result<Dataset<T>> {
    if dataset.feature_names != params.feature_names {
        return Err(Error::InvalidInput(
            "normalization feature names do not match the dataset".into(),
        ));
    }
    let rows = dataset
        .rows
        .iter()
        .map(|row| params.apply_row(row))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        feature_names: dataset.feature_names.clone(),
        rows,
        labels: dataset.labels.clone(),
        row_keys: dataset.row_keys.clone(),
    })
}

/// SMOTE settings. `target_ratio` is the desired minority/majority count
/// ratio after oversampling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoteConfig {
    pub k: usize,
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig { k: 5, target_ratio: 1.0, seed: 0 }
    }
}

fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Oversamples the minority class by interpolating between minority rows and
/// their nearest minority neighbors until `minority/majority >= target_ratio`
/// (synthetic count rounded up). Original rows are kept unchanged, in order;
/// synthetic rows are appended with row key `("synthetic", sequence)`.
pub fn smote<T: Scalar>(dataset: &Dataset<T>, config: &SmoteConfig) -> Result<Dataset<T>> {
    if config.k < 1 {
        return Err(Error::InvalidInput(format!("smote k must be >= 1, got {}", config.k)));
    }
    if !(config.target_ratio > 0.0 && config.target_ratio <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "smote target_ratio must be in (0, 1], got {}",
            config.target_ratio
        )));
    }
    let labels = dataset.labels_required()?;
    let counts = dataset.class_counts()?;
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::InvalidInput("smote needs both classes present".into()));
    }
    let minority = if counts[Label::Malicious.index()] <= counts[Label::Benign.index()] {
        Label::Malicious
    } else {
        Label::Benign
    };
    let minority_count = counts[minority.index()];
    let majority_count = counts[minority.index() ^ 1];
    if minority_count < 2 {
        return Err(Error::InvalidInput(format!(
            "smote needs at least 2 minority rows, got {minority_count}"
        )));
    }

    let needed = (config.target_ratio * majority_count as f64).ceil() as usize;
    let synthetic_count = needed.saturating_sub(minority_count);
    if synthetic_count == 0 {
        return Ok(dataset.clone());
    }

    let minority_idx: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter(|(_, l)| **l == minority)
        .map(|(i, _)| i)
        .collect();
    let k = config.k.min(minority_count - 1);

    // k nearest minority neighbors per minority row, ties to the lower index
    let neighbors: Vec<Vec<usize>> = minority_idx
        .iter()
        .map(|&i| {
            let mut dists: Vec<(T, usize)> = minority_idx
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| (squared_distance(&dataset.rows[i], &dataset.rows[j]), j))
                .collect();
            dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            dists.truncate(k);
            dists.into_iter().map(|(_, j)| j).collect()
        })
        .collect();

    let mut out = dataset.clone();
    let mut rng = derive_rng(config.seed, StreamId::Smote, 0);
    for s in 0..synthetic_count {
        let slot = s % minority_idx.len();
        let base = &dataset.rows[minority_idx[slot]];
        let neighbor = &dataset.rows[neighbors[slot][rng.random_range(0..k)]];
        let delta = T::from_f64_lossy(rng.random::<f64>());
        let row: Vec<T> = base
            .iter()
            .zip(neighbor)
            .map(|(&x, &z)| x + delta * (z - x))
            .collect();
        out.rows.push(row);
        out.labels.as_mut().unwrap().push(minority);
        out.row_keys.push(RowKey::new("synthetic", s as i64));
    }
    Ok(out)
}
