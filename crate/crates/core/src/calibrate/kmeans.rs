//! Seeded K-Means (k-means++ seeding, Lloyd iterations) on standardised
//! two-dimensional features.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub k: usize,
    pub n_init: usize,
    pub max_iter: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: 4,
            n_init: 10,
            max_iter: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub k: usize,
    /// Centroids in standardised feature space.
    pub centroids: Vec<Point>,
    pub feature_means: Point,
    pub feature_stds: Point,
    /// Within-cluster sum of squared distances, standardised space.
    pub sse: f64,
    pub iterations: usize,
    pub best_init: usize,
    /// Cluster of each training point at convergence.
    pub train_assignments: Vec<usize>,
    /// SSE after every assignment step of the selected initialisation.
    #[serde(skip)]
    pub sse_trace: Vec<f64>,
}

/// Per-feature mean and population std; a zero std is replaced by 1.
pub fn standardizer(points: &[Point]) -> (Point, Point) {
    let n = points.len() as f64;
    let mut means = [0.0; 2];
    let mut stds = [0.0; 2];
    for d in 0..2 {
        means[d] = points.iter().map(|p| p[d]).sum::<f64>() / n;
        let var = points.iter().map(|p| (p[d] - means[d]).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        stds[d] = if sd > 1e-12 * means[d].abs().max(1e-300) && sd > 0.0 { sd } else { 1.0 };
    }
    (means, stds)
}

fn standardize(p: &Point, means: &Point, stds: &Point) -> Point {
    [(p[0] - means[0]) / stds[0], (p[1] - means[1]) / stds[1]]
}

#[inline]
fn dist2(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Nearest centroid, ties to the lowest index.
fn nearest(p: &Point, centroids: &[Point]) -> (usize, f64) {
    let mut best = (0, dist2(p, &centroids[0]));
    for (c, centroid) in centroids.iter().enumerate().skip(1) {
        let d = dist2(p, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Number of distinct points (exact comparison; `-0.0 == 0.0`).
pub fn distinct_count(points: &[Point]) -> usize {
    let mut keys: Vec<(u64, u64)> = points
        .iter()
        .map(|p| ((p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits()))
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

fn plus_plus_init(points: &[Point], k: usize, seed: u64, init: u64) -> Vec<Point> {
    let mut rng = rng::derived(seed, init);
    let mut centroids = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = None;
            for (i, w) in d2.iter().enumerate() {
                if *w > 0.0 {
                    if u < *w {
                        chosen = Some(i);
                        break;
                    }
                    u -= w;
                }
            }
            chosen.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[next];
        for (slot, p) in d2.iter_mut().zip(points) {
            *slot = slot.min(dist2(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

struct LloydRun {
    centroids: Vec<Point>,
    assignments: Vec<usize>,
    sse: f64,
    iterations: usize,
    trace: Vec<f64>,
}

fn lloyd(points: &[Point], mut centroids: Vec<Point>, max_iter: usize) -> LloydRun {
    let k = centroids.len();
    let assign_all = |centroids: &[Point]| -> (Vec<usize>, f64) {
        let mut sse = 0.0;
        let a = points
            .iter()
            .map(|p| {
                let (c, d) = nearest(p, centroids);
                sse += d;
                c
            })
            .collect();
        (a, sse)
    };
    let (mut assignments, mut sse) = assign_all(&centroids);
    let mut trace = vec![sse];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut sums = vec![[0.0; 2]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assignments) {
            sums[c][0] += p[0];
            sums[c][1] += p[1];
            counts[c] += 1;
        }
        for c in 0..k {
            // An emptied cluster keeps its previous centroid.
            if counts[c] > 0 {
                centroids[c] = [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64];
            }
        }
        let (next, next_sse) = assign_all(&centroids);
        trace.push(next_sse);
        sse = next_sse;
        if next == assignments {
            break;
        }
        assignments = next;
    }
    LloydRun {
        centroids,
        assignments,
        sse,
        iterations,
        trace,
    }
}

/// Best of `cfg.n_init` seeded runs by SSE, ties to the lowest init index.
pub fn kmeans_fit(points: &[Point], cfg: &KMeansConfig, seed: u64) -> Result<KMeansModel> {
    if cfg.k == 0 || cfg.n_init == 0 {
        return Err(Error::InvalidParameter("k and n_init must be positive".into()));
    }
    if points.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
        return Err(Error::InvalidParameter("non-finite feature value".into()));
    }
    let distinct = distinct_count(points);
    if distinct < cfg.k {
        return Err(Error::InvalidParameter(format!(
            "K-Means needs at least {} distinct points, got {distinct}",
            cfg.k
        )));
    }
    let (means, stds) = standardizer(points);
    let z: Vec<Point> = points.iter().map(|p| standardize(p, &means, &stds)).collect();

    let mut best: Option<(usize, LloydRun)> = None;
    for init in 0..cfg.n_init {
        let start = plus_plus_init(&z, cfg.k, seed, init as u64);
        let run = lloyd(&z, start, cfg.max_iter);
        if best.as_ref().is_none_or(|(_, b)| run.sse < b.sse) {
            best = Some((init, run));
        }
    }
    let (best_init, run) = best.expect("n_init > 0");
    Ok(KMeansModel {
        k: cfg.k,
        centroids: run.centroids,
        feature_means: means,
        feature_stds: stds,
        sse: run.sse,
        iterations: run.iterations,
        best_init,
        train_assignments: run.assignments,
        sse_trace: run.trace,
    })
}

pub fn kmeans_predict(model: &KMeansModel, points: &[Point]) -> Vec<usize> {
    points
        .iter()
        .map(|p| nearest(&standardize(p, &model.feature_means, &model.feature_stds), &model.centroids).0)
        .collect()
}
