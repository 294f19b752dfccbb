//! Principal component projection via power iteration with deflation.

use rand::Rng;

use crate::data::{Dataset, Label};
use crate::error::{Error, Result};
use crate::rng::{derive_rng, StreamId};
use crate::scalar::Scalar;

const TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 10_000;
/// Fixed internal seed for the power-iteration start vectors; the algorithm
/// itself is deterministic, the seed only avoids starting orthogonal to an
/// eigenvector.
const START_SEED: u64 = 0x70_63_61;

/// Top principal components of a dataset and the row projections onto them.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaProjection<T> {
    /// Unit-norm component vectors, one per requested component, largest
    /// variance first. Sign convention: the largest-magnitude entry of each
    /// component is positive.
    pub components: Vec<Vec<T>>,
    /// Covariance eigenvalue per component (population convention).
    pub eigenvalues: Vec<T>,
    /// Per-row projections, aligned with the dataset rows.
    pub projected: Vec<Vec<T>>,
    pub labels: Option<Vec<Label>>,
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn norm<T: Scalar>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

fn mat_vec<T: Scalar>(m: &[Vec<T>], v: &[T]) -> Vec<T> {
    m.iter().map(|row| dot(row, v)).collect()
}

/// Removes the span of `basis` from `v` (one Gram-Schmidt pass).
fn orthogonalize<T: Scalar>(v: &mut [T], basis: &[Vec<T>]) {
    for u in basis {
        let c = dot(v, u);
        for (x, &ui) in v.iter_mut().zip(u) {
            *x = *x - c * ui;
        }
    }
}

fn normalize<T: Scalar>(v: &mut [T]) -> T {
    let n = norm(v);
    if n > T::zero() {
        for x in v.iter_mut() {
            *x = *x / n;
        }
    }
    n
}

/// Flips the sign so the largest-magnitude entry (first on magnitude ties)
/// is positive.
fn fix_sign<T: Scalar>(v: &mut [T]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < T::zero() {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Deterministic fallback direction orthogonal to `found`: the first
/// canonical basis vector with a usable orthogonal residue.
fn orthogonal_fallback<T: Scalar>(n: usize, found: &[Vec<T>]) -> Vec<T> {
    for j in 0..n {
        let mut v = vec![T::zero(); n];
        v[j] = T::one();
        orthogonalize(&mut v, found);
        if normalize(&mut v) > T::from_f64_lossy(1e-6) {
            return v;
        }
    }
    // found spans everything already; caller never asks for more components
    vec![T::zero(); n]
}

/// Projects rows onto the top `n_components` principal components of the
/// column-centered data. Components are eigenvectors of the population
/// covariance, found by power iteration (tolerance 1e-10, at most 10000
/// iterations per component) with deflation.
pub fn pca_project<T: Scalar>(dataset: &Dataset<T>, n_components: usize) -> Result<PcaProjection<T>> {
    let m = dataset.n_rows();
    let n = dataset.n_features();
    if m < 2 {
        return Err(Error::InvalidInput(format!("pca needs at least 2 rows, got {m}")));
    }
    if n_components < 1 || n_components > n {
        return Err(Error::InvalidInput(format!(
            "n_components must be in 1..={n}, got {n_components}"
        )));
    }

    let m_t = T::from_count(m);
    let means: Vec<T> =
        (0..n).map(|j| dataset.rows.iter().map(|r| r[j]).sum::<T>() / m_t).collect();
    let centered: Vec<Vec<T>> = dataset
        .rows
        .iter()
        .map(|row| row.iter().zip(&means).map(|(&x, &mu)| x - mu).collect())
        .collect();

    // population covariance, deflated in place as components are found
    let mut cov = vec![vec![T::zero(); n]; n];
    for row in &centered {
        for i in 0..n {
            for j in i..n {
                cov[i][j] = cov[i][j] + row[i] * row[j];
            }
        }
    }
    for i in 0..n {
        for j in i..n {
            cov[i][j] = cov[i][j] / m_t;
            cov[j][i] = cov[i][j];
        }
    }

    let tolerance = T::from_f64_lossy(TOLERANCE);
    let tiny = T::from_f64_lossy(1e-300);
    let mut rng = derive_rng(START_SEED, StreamId::Subsample, 1);
    let mut components: Vec<Vec<T>> = Vec::with_capacity(n_components);
    let mut eigenvalues: Vec<T> = Vec::with_capacity(n_components);

    for _ in 0..n_components {
        let mut v: Vec<T> =
            (0..n).map(|_| T::from_f64_lossy(rng.random_range(-1.0..1.0))).collect();
        orthogonalize(&mut v, &components);
        if normalize(&mut v) == T::zero() {
            v = orthogonal_fallback(n, &components);
        }
        let mut eigenvalue = T::zero();
        for _ in 0..MAX_ITERATIONS {
            let mut next = mat_vec(&cov, &v);
            orthogonalize(&mut next, &components);
            let len = normalize(&mut next);
            if len <= tiny {
                // remaining spectrum is (numerically) zero
                v = orthogonal_fallback(n, &components);
                eigenvalue = T::zero();
                break;
            }
            eigenvalue = len;
            let drift = T::one() - dot(&next, &v).abs();
            v = next;
            if drift < tolerance {
                break;
            }
        }
        fix_sign(&mut v);
        // deflate: cov -= lambda v v^T
        for i in 0..n {
            for j in 0..n {
                cov[i][j] = cov[i][j] - eigenvalue * v[i] * v[j];
            }
        }
        components.push(v);
        eigenvalues.push(eigenvalue);
    }

    let projected = centered
        .iter()
        .map(|row| components.iter().map(|c| dot(row, c)).collect())
        .collect();
    Ok(PcaProjection { components, eigenvalues, projected, labels: dataset.labels.clone() })
}

impl<T: Scalar> PcaProjection<T> {
    /// Renders `pc1,pc2,label` CSV rows for plotting (only the first two
    /// components; the label column is empty for unlabeled data).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("pc1,pc2,label\n");
        for (i, p) in self.projected.iter().enumerate() {
            let pc1 = p.first().copied().unwrap_or_else(T::zero);
            let pc2 = p.get(1).copied().unwrap_or_else(T::zero);
            let label = match &self.labels {
                Some(labels) => labels[i].to_string(),
                None => String::new(),
            };
            out.push_str(&format!("{pc1},{pc2},{label}\n"));
        }
        out
    }
}
