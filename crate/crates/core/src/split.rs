//! Stratified splitting, fold assignment and subsampling.

use rand::seq::SliceRandom;

use crate::data::{Dataset, Label, CLASS_COUNT};
use crate::error::{Error, Result};
use crate::rng::{derive_rng, StreamId};
use crate::scalar::Scalar;

/// Seeded stratified train/test split. Each class contributes
/// `round(count * test_fraction)` test rows, clamped so both sides keep at
/// least one row per class. Row order within each side follows the input.
pub fn stratified_split<T: Scalar>(
    dataset: &Dataset<T>,
    test_fraction: f64,
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "test_fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let labels = dataset.labels_required()?;
    let mut rng = derive_rng(seed, StreamId::Split, 0);
    let mut is_test = vec![false; dataset.n_rows()];
    for class in [Label::Benign, Label::Malicious] {
        let mut members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == class)
            .map(|(i, _)| i)
            .collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "cannot split: class {class} has fewer than 2 rows"
            )));
        }
        let n_test = ((members.len() as f64 * test_fraction).round() as usize)
            .clamp(1, members.len() - 1);
        members.shuffle(&mut rng);
        for &i in &members[..n_test] {
            is_test[i] = true;
        }
    }
    let test: Vec<usize> = (0..dataset.n_rows()).filter(|&i| is_test[i]).collect();
    let train: Vec<usize> = (0..dataset.n_rows()).filter(|&i| !is_test[i]).collect();
    Ok((dataset.take_rows(&train), dataset.take_rows(&test)))
}

/// Stratified fold ids: within each class, rows are dealt round-robin to
/// folds in index order. Deterministic, no RNG.
pub fn stratified_folds(labels: &[Label], folds: usize) -> Vec<usize> {
    let mut next = [0usize; CLASS_COUNT];
    labels
        .iter()
        .map(|l| {
            let fold = next[l.index()] % folds;
            next[l.index()] += 1;
            fold
        })
        .collect()
}

/// Seeded stratified subsample of at most `max_rows` rows (class proportions
/// preserved by rounding, at least one row per present class). Returns the
/// dataset unchanged when it is already small enough.
pub fn stratified_subsample<T: Scalar>(
    dataset: &Dataset<T>,
    max_rows: usize,
    seed: u64,
) -> Result<Dataset<T>> {
    let labels = dataset.labels_required()?;
    let m = dataset.n_rows();
    if m <= max_rows {
        return Ok(dataset.clone());
    }
    if max_rows == 0 {
        return Err(Error::InvalidInput("subsample size must be positive".into()));
    }
    let mut rng = derive_rng(seed, StreamId::Subsample, 0);
    let mut keep: Vec<usize> = Vec::with_capacity(max_rows);
    for class in [Label::Benign, Label::Malicious] {
        let mut members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == class)
            .map(|(i, _)| i)
            .collect();
        if members.is_empty() {
            continue;
        }
        let share = ((members.len() * max_rows) as f64 / m as f64).round() as usize;
        let share = share.clamp(1, members.len());
        members.shuffle(&mut rng);
        keep.extend_from_slice(&members[..share]);
    }
    keep.sort_unstable();
    keep.truncate(max_rows);
    Ok(dataset.take_rows(&keep))
}
