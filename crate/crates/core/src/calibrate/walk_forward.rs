//! Two-step chronological cross-validation of segment features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regime::Segment;

use super::kmeans::{distinct_count, kmeans_fit, kmeans_predict, KMeansConfig, Point};
use super::scoring::{grouping_matrix_weighted, misclassification_score, GroupingMatrix};

/// Minimum number of segments for both folds to have training and
/// validation data.
pub const MIN_SEGMENTS: usize = 8;

/// What the misclassification count is divided by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreDenominator {
    #[default]
    Segments,
    /// Each segment weighs its day count.
    Days,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    /// Half-open segment index ranges.
    pub train: (usize, usize),
    pub validation: (usize, usize),
    /// Cluster count actually used (reduced on sparse folds).
    pub k_used: usize,
    pub score: f64,
    pub matrix: GroupingMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub cv_score: f64,
    pub folds: Vec<FoldResult>,
}

/// Fold boundaries `[(train_end, val_end); 2]` for `m` segments: training on
/// the first 50% then 75%, each validated on the following quarter.
pub fn fold_bounds(m: usize) -> [(usize, usize); 2] {
    let half = m / 2;
    let three_quarters = 3 * m / 4;
    [(half, three_quarters), (three_quarters, m)]
}

pub fn segment_points(segments: &[Segment]) -> Vec<Point> {
    segments.iter().map(|s| [s.slope, s.volatility]).collect()
}

pub fn walk_forward_cv(
    segments: &[Segment],
    kmeans: &KMeansConfig,
    seed: u64,
    denominator: ScoreDenominator,
) -> Result<CvOutcome> {
    let m = segments.len();
    if m < MIN_SEGMENTS {
        return Err(Error::TooShort {
            needed: MIN_SEGMENTS,
            got: m,
        });
    }
    let points = segment_points(segments);
    let mut folds = Vec::with_capacity(2);
    for (train_end, val_end) in fold_bounds(m) {
        let train = &points[..train_end];
        let cfg = KMeansConfig {
            k: kmeans.k.min(distinct_count(train)),
            ..*kmeans
        };
        let model = kmeans_fit(train, &cfg, seed)?;
        let val = &segments[train_end..val_end];
        let clusters = kmeans_predict(&model, &points[train_end..val_end]);
        let labels: Vec<_> = val.iter().map(|s| s.label).collect();
        let weights: Vec<u64> = match denominator {
            ScoreDenominator::Segments => vec![1; val.len()],
            ScoreDenominator::Days => val.iter().map(|s| s.n_days as u64).collect(),
        };
        let matrix = grouping_matrix_weighted(&clusters, &labels, &weights)?;
        let score = misclassification_score(&matrix, matrix.total())?;
        folds.push(FoldResult {
            train: (0, train_end),
            validation: (train_end, val_end),
            k_used: cfg.k,
            score,
            matrix,
        });
    }
    let cv_score = folds.iter().map(|f| f.score).sum::<f64>() / folds.len() as f64;
    Ok(CvOutcome { cv_score, folds })
}
