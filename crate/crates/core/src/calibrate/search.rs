//! Random search over KAMA parameters scored by walk-forward K-Means
//! agreement.

use chrono::NaiveDate;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kama::{kama_series, trend_signals, CoefficientForm, KamaParams, SellReference};
use crate::regime::{featured_segments, label_days, RegimeLabel, Segment};
use crate::rng;

use super::kmeans::KMeansConfig;
use super::walk_forward::{walk_forward_cv, ScoreDenominator, MIN_SEGMENTS};

/// Inclusive bounds for each searched parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchRanges {
    pub n: (usize, usize),
    pub n_s: (usize, usize),
    pub n_l: (usize, usize),
    pub gamma: (f64, f64),
}

impl Default for SearchRanges {
    fn default() -> Self {
        Self {
            n: (5, 100),
            n_s: (2, 10),
            n_l: (20, 60),
            gamma: (0.1, 3.0),
        }
    }
}

impl SearchRanges {
    pub fn validate(&self) -> Result<()> {
        let ordered = self.n.0 <= self.n.1
            && self.n_s.0 <= self.n_s.1
            && self.n_l.0 <= self.n_l.1
            && self.gamma.0 <= self.gamma.1;
        if !ordered {
            return Err(Error::Config("search range with lower bound above upper bound".into()));
        }
        if self.n.0 < 2 || self.n_s.0 < 2 || !(self.gamma.0 > 0.0) {
            return Err(Error::Config("search ranges need n >= 2, n_s >= 2, gamma > 0".into()));
        }
        if self.n_s.0 >= self.n_l.1 {
            return Err(Error::Config("no n_s < n_l pair exists in the search ranges".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub n_trials: usize,
    /// Falls back to a value derived from the run's global seed.
    pub seed: Option<u64>,
    pub ranges: SearchRanges,
    pub kmeans: KMeansConfig,
    pub score_denominator: ScoreDenominator,
    pub threshold: f64,
    pub coefficient_form: CoefficientForm,
    pub sell_reference: SellReference,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            n_trials: 50,
            seed: None,
            ranges: SearchRanges::default(),
            kmeans: KMeansConfig::default(),
            score_denominator: ScoreDenominator::Segments,
            threshold: 0.5,
            coefficient_form: CoefficientForm::Conventional,
            sell_reference: SellReference::Low,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub params: KamaParams,
    pub cv_score: f64,
    pub per_fold_scores: Vec<f64>,
    pub n_segments: usize,
    /// Why the trial was scored as worst, if it was.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub seed: u64,
    pub n_trials: usize,
    pub ranges: SearchRanges,
    pub kmeans: KMeansConfig,
    pub score_denominator: ScoreDenominator,
    pub best: TrialResult,
    pub trials: Vec<TrialResult>,
}

/// Labels a price window with the given KAMA parameters and a day-aligned
/// low-volatility probability track.
pub fn label_with(
    dates: &[NaiveDate],
    closes: &[f64],
    low_var_prob: &[Option<f64>],
    params: &KamaParams,
    threshold: f64,
) -> Result<Vec<RegimeLabel>> {
    let series = kama_series(dates, closes, params)?;
    let signals = trend_signals(&series, params);
    label_days(low_var_prob, &signals, threshold)
}

fn draw_params(cfg: &CalibrationConfig, seed: u64, trial: usize) -> KamaParams {
    let r = &cfg.ranges;
    let mut rng = rng::derived(rng::sub_seed(seed, "calibrate-trials"), trial as u64);
    let n = rng.random_range(r.n.0..=r.n.1);
    let (n_s, n_l) = loop {
        let n_s = rng.random_range(r.n_s.0..=r.n_s.1);
        let n_l = rng.random_range(r.n_l.0..=r.n_l.1);
        if n_s < n_l {
            break (n_s, n_l);
        }
    };
    let gamma = if r.gamma.0 == r.gamma.1 {
        r.gamma.0
    } else {
        rng.random_range(r.gamma.0..r.gamma.1)
    };
    KamaParams {
        n,
        n_s,
        n_l,
        gamma,
        coefficient_form: cfg.coefficient_form,
        sell_reference: cfg.sell_reference,
    }
}

/// Scores one parameter vector; too few segments or a failed labeling score
/// 1.0 (worst) instead of erroring.
pub fn score_params(
    dates: &[NaiveDate],
    closes: &[f64],
    low_var_prob: &[Option<f64>],
    params: &KamaParams,
    cfg: &CalibrationConfig,
    kmeans_seed: u64,
    trial: usize,
) -> TrialResult {
    let worst = |n_segments: usize, note: String| TrialResult {
        trial,
        params: *params,
        cv_score: 1.0,
        per_fold_scores: vec![],
        n_segments,
        note: Some(note),
    };
    let segments: Vec<Segment> = match label_with(dates, closes, low_var_prob, params, cfg.threshold) {
        Ok(labels) => featured_segments(closes, &labels),
        Err(e) => return worst(0, e.to_string()),
    };
    if segments.len() < MIN_SEGMENTS {
        return worst(
            segments.len(),
            format!("only {} segments (need {MIN_SEGMENTS})", segments.len()),
        );
    }
    match walk_forward_cv(&segments, &cfg.kmeans, kmeans_seed, cfg.score_denominator) {
        Ok(cv) => TrialResult {
            trial,
            params: *params,
            cv_score: cv.cv_score,
            per_fold_scores: cv.folds.iter().map(|f| f.score).collect(),
            n_segments: segments.len(),
            note: None,
        },
        Err(e) => worst(segments.len(), e.to_string()),
    }
}

/// Draws `cfg.n_trials` parameter vectors and keeps the lowest cv score,
/// ties to the earliest trial. Every K-Means call in the run uses one seed.
pub fn random_search(
    dates: &[NaiveDate],
    closes: &[f64],
    low_var_prob: &[Option<f64>],
    cfg: &CalibrationConfig,
    seed: u64,
) -> Result<CalibrationReport> {
    cfg.ranges.validate()?;
    if cfg.n_trials == 0 {
        return Err(Error::Config("calibrate.n_trials must be at least 1".into()));
    }
    if closes.len() != low_var_prob.len() || closes.len() != dates.len() {
        return Err(Error::LengthMismatch {
            what: "training closes vs probability track",
            left: closes.len(),
            right: low_var_prob.len(),
        });
    }
    let longest = cfg.ranges.n_l.1.max(cfg.ranges.n.1);
    if closes.len() <= longest {
        return Err(Error::Config(format!(
            "training partition has {} days; the search ranges need more than {longest}",
            closes.len()
        )));
    }
    let kmeans_seed = rng::sub_seed(seed, "calibrate-kmeans");
    let trials: Vec<TrialResult> = (0..cfg.n_trials)
        .into_par_iter()
        .map(|i| {
            let params = draw_params(cfg, seed, i);
            score_params(dates, closes, low_var_prob, &params, cfg, kmeans_seed, i)
        })
        .collect();
    let best = trials
        .iter()
        .fold(None::<&TrialResult>, |best, t| match best {
            Some(b) if b.cv_score <= t.cv_score => Some(b),
            _ => Some(t),
        })
        .expect("at least one trial")
        .clone();
    Ok(CalibrationReport {
        seed,
        n_trials: cfg.n_trials,
        ranges: cfg.ranges,
        kmeans: cfg.kmeans,
        score_denominator: cfg.score_denominator,
        best,
        trials,
    })
}
