//! Calibration of the KAMA parameters `(n, n_s, n_l, gamma)`.
//!
//! Each candidate labels the training partition, the labels are cut into
//! segments described by (log-price slope, volatility), and K-Means trained
//! on earlier segments must reproduce the regime labels of later ones. The
//! misclassification score measures how often it fails.

mod kmeans;
mod scoring;
mod search;
mod walk_forward;

pub use kmeans::{distinct_count, kmeans_fit, kmeans_predict, standardizer, KMeansConfig, KMeansModel, Point};
pub use scoring::{grouping_matrix, grouping_matrix_weighted, misclassification_score, GroupingMatrix};
pub use search::{
    label_with, random_search, score_params, CalibrationConfig, CalibrationReport, SearchRanges, TrialResult,
};
pub use walk_forward::{fold_bounds, segment_points, walk_forward_cv, CvOutcome, FoldResult, ScoreDenominator, MIN_SEGMENTS};
