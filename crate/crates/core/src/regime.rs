//! Four-regime labeling from a low-volatility probability track and the KAMA
//! trend signal, run-length segmentation, and per-segment features.

use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kama::TrendSignal;
use crate::market_data::TRADING_DAYS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeLabel {
    LowVarBull,
    LowVarBear,
    HighVarBull,
    HighVarBear,
    Undefined,
}

impl RegimeLabel {
    pub const ACTIVE: [RegimeLabel; 4] = [
        RegimeLabel::LowVarBull,
        RegimeLabel::LowVarBear,
        RegimeLabel::HighVarBull,
        RegimeLabel::HighVarBear,
    ];

    /// Column index in a grouping matrix; `None` for `Undefined`.
    pub fn index(self) -> Option<usize> {
        match self {
            RegimeLabel::LowVarBull => Some(0),
            RegimeLabel::LowVarBear => Some(1),
            RegimeLabel::HighVarBull => Some(2),
            RegimeLabel::HighVarBear => Some(3),
            RegimeLabel::Undefined => None,
        }
    }

    pub fn is_bull(self) -> bool {
        matches!(self, RegimeLabel::LowVarBull | RegimeLabel::HighVarBull)
    }

    pub fn is_low_var(self) -> bool {
        matches!(self, RegimeLabel::LowVarBull | RegimeLabel::LowVarBear)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RegimeLabel::LowVarBull => "low_var_bull",
            RegimeLabel::LowVarBear => "low_var_bear",
            RegimeLabel::HighVarBull => "high_var_bull",
            RegimeLabel::HighVarBear => "high_var_bear",
            RegimeLabel::Undefined => "undefined",
        }
    }

    pub fn parse(s: &str) -> Option<RegimeLabel> {
        RegimeLabel::ACTIVE
            .into_iter()
            .chain([RegimeLabel::Undefined])
            .find(|l| l.as_str() == s)
    }
}

/// Maximal run of days sharing one label, with its features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_index: usize,
    /// Inclusive.
    pub end_index: usize,
    pub label: RegimeLabel,
    pub n_days: usize,
    /// OLS slope of log close per day.
    pub slope: f64,
    /// Annualised sample std of within-segment daily log returns.
    pub volatility: f64,
    /// Set when the segment is too short for one of its features, which is
    /// then reported as 0.
    pub short: bool,
}

/// Labels each day. `low_var_prob[t]` is `Pr(low-volatility state)` for day
/// `t`, or `None` on days the switching model does not cover. A probability
/// exactly at the threshold counts as high variance.
pub fn label_days(
    low_var_prob: &[Option<f64>],
    signals: &[TrendSignal],
    threshold: f64,
) -> Result<Vec<RegimeLabel>> {
    if low_var_prob.len() != signals.len() {
        return Err(Error::LengthMismatch {
            what: "probabilities vs signals",
            left: low_var_prob.len(),
            right: signals.len(),
        });
    }
    Ok(low_var_prob
        .iter()
        .zip(signals)
        .map(|(p, s)| match (p, s) {
            (None, _) | (_, TrendSignal::Undefined) => RegimeLabel::Undefined,
            (Some(p), TrendSignal::Bullish) if *p > threshold => RegimeLabel::LowVarBull,
            (Some(p), TrendSignal::Bearish) if *p > threshold => RegimeLabel::LowVarBear,
            (Some(_), TrendSignal::Bullish) => RegimeLabel::HighVarBull,
            (Some(_), TrendSignal::Bearish) => RegimeLabel::HighVarBear,
        })
        .collect())
}

/// Day-aligned `Pr(state 0)` from a switching-model probability matrix whose
/// row `j` belongs to price day `j + 2` (the first return is only used as a
/// lag). Days without a row are `None`.
pub fn low_var_track(probs: &[Vec<f64>], n_days: usize) -> Vec<Option<f64>> {
    (0..n_days)
        .map(|d| d.checked_sub(2).and_then(|j| probs.get(j)).map(|row| row[0]))
        .collect()
}

/// Run-length encodes labels, skipping `Undefined` days. Features are zeroed.
pub fn segment(labels: &[RegimeLabel]) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::new();
    for (t, &label) in labels.iter().enumerate() {
        if label == RegimeLabel::Undefined {
            continue;
        }
        match out.last_mut() {
            Some(seg) if seg.label == label && seg.end_index + 1 == t => {
                seg.end_index = t;
                seg.n_days += 1;
            }
            _ => out.push(Segment {
                start_index: t,
                end_index: t,
                label,
                n_days: 1,
                slope: 0.0,
                volatility: 0.0,
                short: false,
            }),
        }
    }
    out
}

/// Fills slope (needs 2 days) and volatility (needs 3 days) from `closes`.
pub fn segment_features(closes: &[f64], seg: &Segment) -> Segment {
    let mut seg = seg.clone();
    let logp: Vec<f64> = closes[seg.start_index..=seg.end_index]
        .iter()
        .map(|c| c.ln())
        .collect();
    let n = logp.len();
    seg.short = n < 3;
    seg.slope = if n >= 2 {
        let x_mean = (n as f64 - 1.0) / 2.0;
        let y_mean = logp.iter().sum::<f64>() / n as f64;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (i, y) in logp.iter().enumerate() {
            let dx = i as f64 - x_mean;
            sxy += dx * (y - y_mean);
            sxx += dx * dx;
        }
        sxy / sxx
    } else {
        0.0
    };
    seg.volatility = if n >= 3 {
        let r: Vec<f64> = logp.windows(2).map(|w| w[1] - w[0]).collect();
        let m = r.iter().sum::<f64>() / r.len() as f64;
        let var = r.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (r.len() as f64 - 1.0);
        var.sqrt() * TRADING_DAYS.sqrt()
    } else {
        0.0
    };
    seg
}

/// Segments the labels and computes features for each segment.
pub fn featured_segments(closes: &[f64], labels: &[RegimeLabel]) -> Vec<Segment> {
    segment(labels)
        .iter()
        .map(|s| segment_features(closes, s))
        .collect()
}

pub fn write_labels_csv(path: &Path, dates: &[NaiveDate], labels: &[RegimeLabel]) -> Result<()> {
    let mut buf = String::from("date,label\n");
    for (d, l) in dates.iter().zip(labels) {
        buf.push_str(&format!("{d},{}\n", l.as_str()));
    }
    write_text(path, &buf)
}

pub fn write_segments_csv(path: &Path, dates: &[NaiveDate], segments: &[Segment]) -> Result<()> {
    let mut buf = String::from("start_date,end_date,label,n_days,slope,volatility\n");
    for s in segments {
        buf.push_str(&format!(
            "{},{},{},{},{},{}\n",
            dates[s.start_index],
            dates[s.end_index],
            s.label.as_str(),
            s.n_days,
            s.slope,
            s.volatility
        ));
    }
    write_text(path, &buf)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
