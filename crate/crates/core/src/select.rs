//! Information-gain feature ranking and top-k selection.
//!
//! Continuous features are discretized by equal-frequency binning; the gain
//! of a feature is the reduction in label entropy after conditioning on its
//! bin, which equals the empirical mutual information between the binned
//! feature and the class.

use crate::data::{Dataset, Label, CLASS_COUNT};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Features sorted by information gain (bits), descending; ties keep the
/// dataset's schema order.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRanking<T> {
    pub entries: Vec<(String, T)>,
}

impl<T: Scalar> FeatureRanking<T> {
    /// Ranked feature names, best first.
    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Renders the ranking as `feature,gain_bits` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,gain_bits\n");
        for (name, gain) in &self.entries {
            out.push_str(&format!("{name},{gain}\n"));
        }
        out
    }
}

fn entropy_from_counts<T: Scalar>(counts: &[usize], total: usize) -> T {
    if total == 0 {
        return T::zero();
    }
    let total_t = T::from_count(total);
    let mut h = T::zero();
    for &c in counts {
        if c > 0 {
            let p = T::from_count(c) / total_t;
            h = h - p * p.log2();
        }
    }
    h
}

/// Shannon entropy of the label distribution, in bits.
pub fn label_entropy<T: Scalar>(labels: &[Label]) -> Result<T> {
    if labels.is_empty() {
        return Err(Error::InvalidInput("label entropy of an empty list".into()));
    }
    let mut counts = [0usize; CLASS_COUNT];
    for l in labels {
        counts[l.index()] += 1;
    }
    Ok(entropy_from_counts(&counts, labels.len()))
}

/// Equal-frequency bin assignment: bin edges sit at the `ceil(i*M/bins)`-th
/// order statistics (1-based, i = 1..=bins); duplicate edges merge, so a
/// constant column yields a single bin. Returns per-row bin ids and the
/// number of bins.
fn bin_assignments<T: Scalar>(column: &[T], bins: usize) -> (Vec<usize>, usize) {
    let m = column.len();
    let mut sorted = column.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut edges: Vec<T> = Vec::with_capacity(bins);
    for i in 1..=bins {
        let rank = (i * m).div_ceil(bins);
        let edge = sorted[rank - 1];
        if edges.last() != Some(&edge) {
            edges.push(edge);
        }
    }
    let assignment = column
        .iter()
        .map(|v| edges.partition_point(|e| e < v))
        .collect();
    (assignment, edges.len())
}

/// Information gain of a discretized column about the labels, in bits.
pub fn information_gain<T: Scalar>(column: &[T], labels: &[Label], bins: usize) -> Result<T> {
    if column.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "column length {} does not match labels length {}",
            column.len(),
            labels.len()
        )));
    }
    if bins == 0 {
        return Err(Error::InvalidInput("bins must be >= 1".into()));
    }
    let m = column.len();
    let h_y: T = label_entropy(labels)?;
    let (assignment, n_bins) = bin_assignments(column, bins);

    let mut joint = vec![[0usize; CLASS_COUNT]; n_bins];
    for (bin, label) in assignment.iter().zip(labels) {
        joint[*bin][label.index()] += 1;
    }
    let mut conditional = T::zero();
    let m_t = T::from_count(m);
    for bin_counts in &joint {
        let bin_total: usize = bin_counts.iter().sum();
        if bin_total > 0 {
            let weight = T::from_count(bin_total) / m_t;
            conditional = conditional + weight * entropy_from_counts(bin_counts, bin_total);
        }
    }
    // clamp tiny negative rounding residue
    Ok((h_y - conditional).max(T::zero()))
}

/// Ranks every feature by information gain with the class.
pub fn rank_features<T: Scalar>(dataset: &Dataset<T>, bins: usize) -> Result<FeatureRanking<T>> {
    let labels = dataset.labels_required()?;
    if dataset.n_rows() == 0 {
        return Err(Error::InvalidInput("cannot rank features of an empty dataset".into()));
    }
    let mut scored: Vec<(usize, T)> = (0..dataset.n_features())
        .map(|j| {
            let gain = information_gain(&dataset.column(j), labels, bins)?;
            Ok((j, gain))
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(FeatureRanking {
        entries: scored
            .into_iter()
            .map(|(j, gain)| (dataset.feature_names[j].clone(), gain))
            .collect(),
    })
}

/// Restricts the dataset to the `k` top-ranked features, in ranking order.
pub fn select_top_k<T: Scalar>(
    dataset: &Dataset<T>,
    ranking: &FeatureRanking<T>,
    k: usize,
) -> Result<Dataset<T>> {
    if k < 1 || k > dataset.n_features() {
        return Err(Error::InvalidInput(format!(
            "k must be in 1..={}, got {k}",
            dataset.n_features()
        )));
    }
    let names: Vec<String> = ranking.entries[..k].iter().map(|(n, _)| n.clone()).collect();
    dataset.project(&names)
}
