//! Cluster/label grouping matrix and the misclassification score.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regime::RegimeLabel;

/// Rows are clusters, columns the four active labels in
/// `RegimeLabel::ACTIVE` order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupingMatrix {
    pub counts: Vec<[u64; 4]>,
}

impl GroupingMatrix {
    pub fn zeros(rows: usize) -> Self {
        Self {
            counts: vec![[0; 4]; rows],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// `row_sum - row_max` for each cluster. With several tied dominant
    /// labels this still leaves exactly one of them unpenalised.
    pub fn row_misclassifications(&self) -> Vec<u64> {
        self.counts
            .iter()
            .map(|row| row.iter().sum::<u64>() - row.iter().copied().max().unwrap_or(0))
            .collect()
    }
}

/// Tallies segments per (cluster, label). The matrix has at least four rows.
pub fn grouping_matrix(clusters: &[usize], labels: &[RegimeLabel]) -> Result<GroupingMatrix> {
    grouping_matrix_weighted(clusters, labels, &vec![1; clusters.len()])
}

/// Like [`grouping_matrix`] but each segment contributes `weights[i]`
/// (e.g. its day count).
pub fn grouping_matrix_weighted(
    clusters: &[usize],
    labels: &[RegimeLabel],
    weights: &[u64],
) -> Result<GroupingMatrix> {
    if clusters.len() != labels.len() || clusters.len() != weights.len() {
        return Err(Error::LengthMismatch {
            what: "clusters vs labels",
            left: clusters.len(),
            right: labels.len(),
        });
    }
    let rows = clusters.iter().map(|c| c + 1).max().unwrap_or(0).max(4);
    let mut m = GroupingMatrix::zeros(rows);
    for ((&c, &l), &w) in clusters.iter().zip(labels).zip(weights) {
        let col = l
            .index()
            .ok_or_else(|| Error::InvalidParameter("undefined label in grouping matrix".into()))?;
        m.counts[c][col] += w;
    }
    Ok(m)
}

/// `sum over rows of (row_sum - row_max)`, divided by `total`.
pub fn misclassification_score(matrix: &GroupingMatrix, total: u64) -> Result<f64> {
    if total == 0 {
        return Err(Error::InvalidParameter("misclassification score of zero segments".into()));
    }
    let miss: u64 = matrix.row_misclassifications().iter().sum();
    Ok(miss as f64 / total as f64)
}
