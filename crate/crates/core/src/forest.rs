//! Random forest: bagged CART trees with majority voting, plus model
//! persistence.
//!
//! Training is deterministic: tree `i` draws its bootstrap sample and its
//! split candidates from an RNG derived from `(seed, i)`, so the model is
//! identical for any worker count.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label};
use crate::error::{Error, Result};
use crate::preprocess::NormalizationParams;
use crate::rng::{derive_rng, StreamId};
use crate::scalar::Scalar;
use crate::tree::{train_tree_on, Node, Tree};

/// Per-node feature subsampling rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSubsample {
    Sqrt,
    Log2,
    All,
}

impl FeatureSubsample {
    /// Number of candidate features drawn at each node.
    pub fn candidate_count(self, n_features: usize) -> usize {
        match self {
            FeatureSubsample::Sqrt => ((n_features as f64).sqrt().ceil() as usize).max(1),
            FeatureSubsample::Log2 => ((n_features as f64).log2().ceil() as usize).max(1),
            FeatureSubsample::All => n_features,
        }
    }
}

impl fmt::Display for FeatureSubsample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FeatureSubsample::Sqrt => "sqrt",
            FeatureSubsample::Log2 => "log2",
            FeatureSubsample::All => "all",
        };
        f.write_str(s)
    }
}

impl FromStr for FeatureSubsample {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "sqrt" => Ok(FeatureSubsample::Sqrt),
            "log2" => Ok(FeatureSubsample::Log2),
            "all" => Ok(FeatureSubsample::All),
            other => Err(format!("unknown feature subsample rule {other:?}")),
        }
    }
}

/// Random forest configuration point. `max_depth: None` means unlimited.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HyperParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub feature_subsample: FeatureSubsample,
}

impl HyperParams {
    /// The conventional untuned configuration, used as the comparison
    /// baseline.
    pub fn default_rf() -> Self {
        HyperParams {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            feature_subsample: FeatureSubsample::Sqrt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidInput("n_trees must be positive".into()));
        }
        if self.max_depth == Some(0) {
            return Err(Error::InvalidInput("max_depth must be positive".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidInput("min_samples_split must be >= 2".into()));
        }
        Ok(())
    }
}

/// Class name strings stored in the model file, in label-index order.
pub const CLASS_NAMES: [&str; 2] = ["benign", "malicious"];

/// A trained ensemble plus everything needed to score raw feature vectors:
/// the selected feature names and the training-time normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct ForestModel<T> {
    pub trees: Vec<Tree<T>>,
    pub params: HyperParams,
    pub feature_names: Vec<String>,
    pub normalization: NormalizationParams<T>,
    pub seed: u64,
}

/// Fraction of malicious votes at which a row is labeled malicious.
pub const DECISION_THRESHOLD: f64 = 0.5;

impl<T: Scalar> ForestModel<T> {
    /// Votes the ensemble on an already-normalized row. The score is the
    /// fraction of malicious votes; the label is malicious iff the score
    /// reaches [`DECISION_THRESHOLD`].
    pub fn predict(&self, row: &[T]) -> Result<(Label, f64)> {
        if row.len() != self.feature_names.len() {
            return Err(Error::InvalidInput(format!(
                "row has {} values, model expects {}",
                row.len(),
                self.feature_names.len()
            )));
        }
        let malicious_votes = self
            .trees
            .iter()
            .filter(|t| t.predict(row) == Label::Malicious)
            .count();
        let score = malicious_votes as f64 / self.trees.len() as f64;
        let label = if score >= DECISION_THRESHOLD { Label::Malicious } else { Label::Benign };
        Ok((label, score))
    }

    /// Normalizes a raw row with the stored parameters, then votes.
    pub fn predict_raw(&self, row: &[T]) -> Result<(Label, f64)> {
        self.predict(&self.normalization.apply_row(row)?)
    }

    /// Scores every row of a raw dataset, projecting columns by name first.
    pub fn predict_dataset(&self, dataset: &Dataset<T>) -> Result<Vec<(Label, f64)>> {
        let projected = dataset.project(&self.feature_names)?;
        projected.rows.iter().map(|row| self.predict_raw(row)).collect()
    }

    fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.trees.len() != self.params.n_trees {
            return Err(Error::Model(format!(
                "model has {} trees, params say {}",
                self.trees.len(),
                self.params.n_trees
            )));
        }
        if self.normalization.feature_names != self.feature_names {
            return Err(Error::Model("normalization does not match feature names".into()));
        }
        let n = self.feature_names.len();
        for tree in &self.trees {
            for node in &tree.nodes {
                match node {
                    Node::Split { feature, threshold, left, right } => {
                        if *feature >= n {
                            return Err(Error::Model(format!(
                                "split references feature {feature}, model has {n}"
                            )));
                        }
                        if !threshold.is_finite() {
                            return Err(Error::Model("non-finite threshold".into()));
                        }
                        if *left >= tree.nodes.len() || *right >= tree.nodes.len() {
                            return Err(Error::Model("child index out of range".into()));
                        }
                    }
                    Node::Leaf { counts } => {
                        if counts.iter().sum::<u32>() == 0 {
                            return Err(Error::Model("empty leaf".into()));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Trains `params.n_trees` trees on bootstrap samples of the dataset.
///
/// `workers` is a parallelism hint: 0 uses the current rayon pool, 1 trains
/// sequentially, anything else runs a dedicated pool of that size. The model
/// does not depend on the hint.
pub fn train_forest<T: Scalar>(
    dataset: &Dataset<T>,
    params: &HyperParams,
    normalization: NormalizationParams<T>,
    seed: u64,
    workers: usize,
) -> Result<ForestModel<T>> {
    params.validate()?;
    let labels = dataset.labels_required()?;
    let counts = dataset.class_counts()?;
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::InvalidInput("training needs both classes present".into()));
    }
    if normalization.feature_names != dataset.feature_names {
        return Err(Error::InvalidInput(
            "normalization feature names do not match the dataset".into(),
        ));
    }

    let m = dataset.n_rows();
    let train_one = |i: usize| -> Tree<T> {
        let mut rng = derive_rng(seed, StreamId::Bootstrap, i as u64);
        let indices: Vec<usize> = (0..m).map(|_| rng.random_range(0..m)).collect();
        train_tree_on(&dataset.rows, labels, indices, params, &mut rng, &mut |_, _| {})
    };

    let trees: Vec<Tree<T>> = match workers {
        1 => (0..params.n_trees).map(train_one).collect(),
        0 => {
            use rayon::prelude::*;
            (0..params.n_trees).into_par_iter().map(train_one).collect()
        }
        n => {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidInput(format!("worker pool: {e}")))?;
            pool.install(|| (0..params.n_trees).into_par_iter().map(train_one).collect())
        }
    };

    Ok(ForestModel {
        trees,
        params: params.clone(),
        feature_names: dataset.feature_names.clone(),
        normalization,
        seed,
    })
}

/// On-disk model schema version.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
struct ModelFileRef<'a, T> {
    version: u32,
    seed: u64,
    class_names: [&'a str; 2],
    params: &'a HyperParams,
    feature_names: &'a [String],
    normalization: &'a NormalizationParams<T>,
    trees: &'a [Tree<T>],
}

#[derive(Deserialize)]
struct ModelFile<T> {
    version: u32,
    seed: u64,
    #[allow(dead_code)]
    class_names: [String; 2],
    params: HyperParams,
    feature_names: Vec<String>,
    normalization: NormalizationParams<T>,
    trees: Vec<Tree<T>>,
}

/// Writes the model as versioned, self-describing JSON. The rendering is
/// canonical: saving a loaded model reproduces the file byte for byte.
pub fn save_model<T: Scalar, W: Write>(model: &ForestModel<T>, mut writer: W) -> Result<()> {
    model.validate()?;
    let file = ModelFileRef {
        version: MODEL_FORMAT_VERSION,
        seed: model.seed,
        class_names: CLASS_NAMES,
        params: &model.params,
        feature_names: &model.feature_names,
        normalization: &model.normalization,
        trees: &model.trees,
    };
    let rendered = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::Model(format!("serialize: {e}")))?;
    writer.write_all(rendered.as_bytes())?;
    writer.write_all(b"\n")?;
    Ok(())
}

/// Reads a model written by [`save_model`], rejecting unknown versions.
pub fn load_model<T: Scalar, R: Read>(mut reader: R) -> Result<ForestModel<T>> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Model(format!("parse: {e}")))?;
    match value.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == MODEL_FORMAT_VERSION as u64 => {}
        Some(v) => {
            return Err(Error::Model(format!(
                "unsupported version {v}, expected {MODEL_FORMAT_VERSION}"
            )))
        }
        None => return Err(Error::Model("missing version tag".into())),
    }
    let file: ModelFile<T> =
        serde_json::from_value(value).map_err(|e| Error::Model(format!("decode: {e}")))?;
    let model = ForestModel {
        trees: file.trees,
        params: file.params,
        feature_names: file.feature_names,
        normalization: file.normalization,
        seed: file.seed,
    };
    model.validate()?;
    Ok(model)
}
