//! Single CART tree: Gini splits on midpoint thresholds with per-node
//! feature subsampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Label, CLASS_COUNT};
use crate::forest::HyperParams;
use crate::scalar::Scalar;

/// Minimum weighted-impurity reduction for a split to be kept.
const MIN_IMPURITY_REDUCTION: f64 = 1e-12;

/// One tree node. Rows route left when `value <= threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node<T> {
    Split { feature: usize, threshold: T, left: usize, right: usize },
    Leaf { counts: [u32; CLASS_COUNT] },
}

/// A trained tree stored as an index-linked node arena; the root is node 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tree<T> {
    /// Routes a row to its leaf and votes that leaf's majority class
    /// (count ties vote benign).
    pub fn predict(&self, row: &[T]) -> Label {
        let counts = self.leaf_counts(row);
        if counts[Label::Malicious.index()] > counts[Label::Benign.index()] {
            Label::Malicious
        } else {
            Label::Benign
        }
    }

    /// Class counts of the leaf a row routes to.
    pub fn leaf_counts(&self, row: &[T]) -> [u32; CLASS_COUNT] {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { counts } => return *counts,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[Node<T>], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

fn class_counts(labels: &[Label], indices: &[usize]) -> [u32; CLASS_COUNT] {
    let mut counts = [0u32; CLASS_COUNT];
    for &i in indices {
        counts[labels[i].index()] += 1;
    }
    counts
}

fn gini<T: Scalar>(counts: &[u32; CLASS_COUNT]) -> T {
    let total: u32 = counts.iter().sum();
    if total == 0 {
        return T::zero();
    }
    let total_t = T::from_count(total as usize);
    let mut sum_sq = T::zero();
    for &c in counts {
        let p = T::from_count(c as usize) / total_t;
        sum_sq = sum_sq + p * p;
    }
    T::one() - sum_sq
}

/// Candidate feature set for one node: `m` features sampled without
/// replacement, returned in ascending order. No RNG is consumed when the
/// subsample covers all features.
fn sample_features<R: Rng>(n_features: usize, m: usize, rng: &mut R) -> Vec<usize> {
    if m >= n_features {
        return (0..n_features).collect();
    }
    let mut pool: Vec<usize> = (0..n_features).collect();
    for j in 0..m {
        let pick = rng.random_range(j..n_features);
        pool.swap(j, pick);
    }
    pool.truncate(m);
    pool.sort_unstable();
    pool
}

struct BestSplit<T> {
    weighted_gini: T,
    feature: usize,
    threshold: T,
}

/// Scans midpoints between consecutive distinct values of each candidate
/// feature; keeps the strictly best weighted child Gini, so ties resolve to
/// the lowest feature index, then the lowest threshold.
fn find_best_split<T: Scalar>(
    rows: &[Vec<T>],
    labels: &[Label],
    indices: &[usize],
    features: &[usize],
    node_counts: &[u32; CLASS_COUNT],
) -> Option<BestSplit<T>> {
    let n = indices.len();
    let n_t = T::from_count(n);
    let mut best: Option<BestSplit<T>> = None;
    let mut values: Vec<(T, usize)> = Vec::with_capacity(n);
    for &feature in features {
        values.clear();
        values.extend(indices.iter().map(|&i| (rows[i][feature], labels[i].index())));
        values.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        let mut left = [0u32; CLASS_COUNT];
        let mut at = 0;
        while at < n {
            let v = values[at].0;
            while at < n && values[at].0 == v {
                left[values[at].1] += 1;
                at += 1;
            }
            if at == n {
                break;
            }
            let right = [node_counts[0] - left[0], node_counts[1] - left[1]];
            let n_left: u32 = left.iter().sum();
            let n_right: u32 = right.iter().sum();
            let weighted = (gini::<T>(&left) * T::from_count(n_left as usize)
                + gini::<T>(&right) * T::from_count(n_right as usize))
                / n_t;
            if best.as_ref().is_none_or(|b| weighted < b.weighted_gini) {
                let threshold = (v + values[at].0) / T::from_f64_lossy(2.0);
                best = Some(BestSplit { weighted_gini: weighted, feature, threshold });
            }
        }
    }
    best
}

/// Trains a CART tree on all rows. See [`train_tree_on`] for the index-set
/// variant used with bootstrap samples.
pub fn train_tree<T: Scalar, R: Rng>(
    rows: &[Vec<T>],
    labels: &[Label],
    params: &HyperParams,
    rng: &mut R,
) -> Tree<T> {
    let indices: Vec<usize> = (0..rows.len()).collect();
    train_tree_on(rows, labels, indices, params, rng, &mut |_, _| {})
}

/// Trains a tree on an index multiset (bootstrap samples repeat indices).
/// `observe` is called once per attempted split with the candidate feature
/// set and the chosen feature, which lets tests verify the subsampling
/// contract.
pub fn train_tree_on<T: Scalar, R: Rng>(
    rows: &[Vec<T>],
    labels: &[Label],
    indices: Vec<usize>,
    params: &HyperParams,
    rng: &mut R,
    observe: &mut dyn FnMut(&[usize], Option<usize>),
) -> Tree<T> {
    assert!(!indices.is_empty(), "cannot train a tree on an empty node");
    let n_features = rows[0].len();
    let m = params.feature_subsample.candidate_count(n_features);
    let reduction_floor = T::from_f64_lossy(MIN_IMPURITY_REDUCTION);

    let mut nodes: Vec<Node<T>> = vec![Node::Leaf { counts: [0; CLASS_COUNT] }];
    // (node slot, indices, depth); LIFO keeps memory proportional to depth
    let mut work = vec![(0usize, indices, 0usize)];

    while let Some((slot, node_indices, depth)) = work.pop() {
        let counts = class_counts(labels, &node_indices);
        let node_gini = gini::<T>(&counts);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || node_indices.len() < params.min_samples_split {
            nodes[slot] = Node::Leaf { counts };
            continue;
        }

        let features = sample_features(n_features, m, rng);
        let best = find_best_split(rows, labels, &node_indices, &features, &counts);
        observe(&features, best.as_ref().map(|b| b.feature));
        let Some(best) = best else {
            nodes[slot] = Node::Leaf { counts };
            continue;
        };
        if node_gini - best.weighted_gini <= reduction_floor {
            nodes[slot] = Node::Leaf { counts };
            continue;
        }

        let (left_indices, right_indices): (Vec<usize>, Vec<usize>) = node_indices
            .into_iter()
            .partition(|&i| rows[i][best.feature] <= best.threshold);
        let left = nodes.len();
        nodes.push(Node::Leaf { counts: [0; CLASS_COUNT] });
        nodes.push(Node::Leaf { counts: [0; CLASS_COUNT] });
        nodes[slot] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right: left + 1,
        };
        work.push((left + 1, right_indices, depth + 1));
        work.push((left, left_indices, depth + 1));
    }
    Tree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::FeatureSubsample;
    use crate::rng::{derive_rng, StreamId};

    use Label::{Benign as B, Malicious as M};

    fn params(subsample: FeatureSubsample) -> HyperParams {
        HyperParams {
            n_trees: 1,
            max_depth: None,
            min_samples_split: 2,
            feature_subsample: subsample,
        }
    }

    fn rows(values: &[&[f64]]) -> Vec<Vec<f64>> {
        values.iter().map(|r| r.to_vec()).collect()
    }

    /// Brute-force oracle: enumerate every (feature, midpoint) split and
    /// return the minimal weighted Gini with the tie rule applied.
    fn enumerate_best_split(
        rows: &[Vec<f64>],
        labels: &[Label],
    ) -> Option<(f64, usize, f64)> {
        let gini_of = |subset: &[usize]| -> f64 {
            if subset.is_empty() {
                return 0.0;
            }
            let m = subset.iter().filter(|&&i| labels[i] == M).count() as f64;
            let n = subset.len() as f64;
            let p = m / n;
            1.0 - p * p - (1.0 - p) * (1.0 - p)
        };
        let n = rows.len();
        let mut best: Option<(f64, usize, f64)> = None;
        for f in 0..rows[0].len() {
            let mut vals: Vec<f64> = rows.iter().map(|r| r[f]).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
            for pair in vals.windows(2) {
                let thr = (pair[0] + pair[1]) / 2.0;
                let left: Vec<usize> = (0..n).filter(|&i| rows[i][f] <= thr).collect();
                let right: Vec<usize> = (0..n).filter(|&i| rows[i][f] > thr).collect();
                let weighted = (gini_of(&left) * left.len() as f64
                    + gini_of(&right) * right.len() as f64)
                    / n as f64;
                if best.is_none() || weighted < best.unwrap().0 {
                    best = Some((weighted, f, thr));
                }
            }
        }
        best
    }

    #[test]
    fn four_point_split_matches_enumeration() {
        let data = rows(&[&[1.0], &[2.0], &[3.0], &[4.0]]);
        let labels = [B, B, M, M];
        let mut rng = derive_rng(0, StreamId::Bootstrap, 0);
        let tree = train_tree(&data, &labels, &params(FeatureSubsample::All), &mut rng);
        let oracle = enumerate_best_split(&data, &labels).unwrap();
        assert_eq!(oracle.2, 2.5);
        match &tree.nodes[0] {
            Node::Split { feature, threshold, left, right } => {
                assert_eq!(*feature, oracle.1);
                assert_eq!(*threshold, oracle.2);
                assert!(matches!(tree.nodes[*left], Node::Leaf { counts: [2, 0] }));
                assert!(matches!(tree.nodes[*right], Node::Leaf { counts: [0, 2] }));
            }
            other => panic!("expected split at root, got {other:?}"),
        }
    }

    #[test]
    fn pure_input_is_single_leaf() {
        let data = rows(&[&[1.0], &[2.0], &[3.0]]);
        let labels = [B, B, B];
        let mut rng = derive_rng(0, StreamId::Bootstrap, 0);
        let tree = train_tree(&data, &labels, &params(FeatureSubsample::All), &mut rng);
        assert_eq!(tree.nodes.len(), 1);
        assert!(matches!(tree.nodes[0], Node::Leaf { counts: [3, 0] }));
    }

    #[test]
    fn depth_cap_leaves_impure_leaves() {
        // XOR-like layout: no depth-1 tree separates it
        let data = rows(&[&[0.0, 0.0], &[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]]);
        let labels = [B, M, M, B];
        let mut p = params(FeatureSubsample::All);
        p.max_depth = Some(1);
        let mut rng = derive_rng(0, StreamId::Bootstrap, 0);
        let tree = train_tree(&data, &labels, &p, &mut rng);
        assert_eq!(tree.depth(), 1);
        for node in &tree.nodes[1..] {
            match node {
                Node::Leaf { counts } => assert!(counts[0] > 0 && counts[1] > 0),
                Node::Split { .. } => panic!("depth cap violated"),
            }
        }
    }

    #[test]
    fn no_informative_split_collapses_to_leaf() {
        // identical rows with mixed labels: no midpoint exists
        let data = rows(&[&[1.0], &[1.0], &[1.0], &[1.0]]);
        let labels = [B, M, B, M];
        let mut rng = derive_rng(0, StreamId::Bootstrap, 0);
        let tree = train_tree(&data, &labels, &params(FeatureSubsample::All), &mut rng);
        assert_eq!(tree.nodes.len(), 1);
    }

    #[test]
    fn min_samples_split_stops_early() {
        let data = rows(&[&[1.0], &[2.0], &[3.0], &[4.0]]);
        let labels = [B, B, M, M];
        let mut p = params(FeatureSubsample::All);
        p.min_samples_split = 5;
        let mut rng = derive_rng(0, StreamId::Bootstrap, 0);
        let tree = train_tree(&data, &labels, &p, &mut rng);
        assert_eq!(tree.nodes.len(), 1);
    }

    #[test]
    fn leaf_tie_votes_benign() {
        let tree = Tree::<f64> { nodes: vec![Node::Leaf { counts: [2, 2] }] };
        assert_eq!(tree.predict(&[0.0]), B);
    }

    #[test]
    fn candidate_sets_respect_subsample_size() {
        let data: Vec<Vec<f64>> = (0..40)
            .map(|i| (0..10).map(|j| ((i * 13 + j * 7) % 23) as f64).collect())
            .collect();
        let labels: Vec<Label> = (0..40).map(|i| if i % 3 == 0 { M } else { B }).collect();
        let mut rng = derive_rng(5, StreamId::Bootstrap, 0);
        let mut sizes = Vec::new();
        let p = params(FeatureSubsample::Sqrt);
        train_tree_on(
            &data,
            &labels,
            (0..40).collect(),
            &p,
            &mut rng,
            &mut |candidates, chosen| {
                sizes.push(candidates.len());
                if let Some(f) = chosen {
                    assert!(candidates.contains(&f));
                }
                let mut sorted = candidates.to_vec();
                sorted.dedup();
                assert_eq!(sorted.len(), candidates.len(), "duplicate candidate feature");
            },
        );
        assert!(!sizes.is_empty());
        // ceil(sqrt(10)) = 4
        assert!(sizes.iter().all(|&s| s == 4), "{sizes:?}");
    }

    #[test]
    fn split_never_increases_weighted_impurity() {
        let data: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![((i * 31) % 17) as f64, ((i * 7) % 13) as f64])
            .collect();
        let labels: Vec<Label> = (0..60).map(|i| if (i * 11) % 5 < 2 { M } else { B }).collect();
        let mut rng = derive_rng(3, StreamId::Bootstrap, 0);
        let tree = train_tree(&data, &labels, &params(FeatureSubsample::All), &mut rng);

        // reconstruct node membership by routing the training rows
        fn check(
            tree: &Tree<f64>,
            data: &[Vec<f64>],
            labels: &[Label],
            at: usize,
            members: Vec<usize>,
        ) {
            let gini_of = |subset: &[usize]| -> f64 {
                let m = subset.iter().filter(|&&i| labels[i] == M).count() as f64;
                let n = subset.len() as f64;
                let p = m / n;
                1.0 - p * p - (1.0 - p) * (1.0 - p)
            };
            if let Node::Split { feature, threshold, left, right } = &tree.nodes[at] {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    members.iter().partition(|&&i| data[i][*feature] <= *threshold);
                assert!(!l.is_empty() && !r.is_empty());
                let weighted = (gini_of(&l) * l.len() as f64 + gini_of(&r) * r.len() as f64)
                    / members.len() as f64;
                assert!(weighted <= gini_of(&members) + 1e-12);
                check(tree, data, labels, *left, l);
                check(tree, data, labels, *right, r);
            }
        }
        check(&tree, &data, &labels, 0, (0..60).collect());
    }
}
