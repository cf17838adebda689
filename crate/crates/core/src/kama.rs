//! Kaufman's adaptive moving average, its volatility filter, and the
//! bullish/bearish trend-signal state machine.
//!
//! All tracks are aligned with the input closes. Positions before a value
//! exists hold `NaN`; `KamaSeries::warmup_end` is the first index at which
//! every track is defined.

use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientForm {
    /// `C = [ER (k_s - k_l) + k_l]^2`: slow smoothing in directionless markets.
    #[default]
    Conventional,
    /// `C = [ER (k_s - k_l) + k_s]^2`, the variant with `k_s` as offset.
    AsPrinted,
}

/// Reference level a falling KAMA is measured against for the sell trigger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SellReference {
    /// Minimum of the prior `n` KAMA values.
    #[default]
    Low,
    /// Maximum of the prior `n` KAMA values.
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KamaParams {
    /// Window for the efficiency ratio, the filter and the prior-extreme lookback.
    pub n: usize,
    pub n_s: usize,
    pub n_l: usize,
    pub gamma: f64,
    pub coefficient_form: CoefficientForm,
    pub sell_reference: SellReference,
}

impl Default for KamaParams {
    fn default() -> Self {
        Self {
            n: 10,
            n_s: 2,
            n_l: 30,
            gamma: 1.0,
            coefficient_form: CoefficientForm::Conventional,
            sell_reference: SellReference::Low,
        }
    }
}

impl KamaParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!("n must be >= 2, got {}", self.n)));
        }
        if !(2 <= self.n_s && self.n_s < self.n_l) {
            return Err(Error::InvalidParameter(format!(
                "need 2 <= n_s < n_l, got n_s = {}, n_l = {}",
                self.n_s, self.n_l
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be > 0, got {}", self.gamma)));
        }
        Ok(())
    }

    /// Smoothing constants `(k_s, k_l) = (2/(n_s+1), 2/(n_l+1))`.
    pub fn smoothing_constants(&self) -> (f64, f64) {
        (2.0 / (self.n_s as f64 + 1.0), 2.0 / (self.n_l as f64 + 1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrendSignal {
    Bullish,
    Bearish,
    Undefined,
}

impl TrendSignal {
    pub fn as_str(self) -> &'static str {
        match self {
            TrendSignal::Bullish => "bullish",
            TrendSignal::Bearish => "bearish",
            TrendSignal::Undefined => "undefined",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KamaSeries {
    pub dates: Vec<NaiveDate>,
    pub kama: Vec<f64>,
    pub er: Vec<f64>,
    pub filter: Vec<f64>,
    pub warmup_end: usize,
}

/// `ER_t = |P_t - P_{t-n}| / sum_{i=t-n+1..t} |P_i - P_{i-1}|`, zero when the
/// path length is zero. Defined for `t >= n`.
pub fn efficiency_ratio(closes: &[f64], n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n must be >= 2, got {n}")));
    }
    if closes.len() <= n {
        return Err(Error::TooShort {
            needed: n + 1,
            got: closes.len(),
        });
    }
    let mut er = vec![f64::NAN; closes.len()];
    for t in n..closes.len() {
        let momentum = (closes[t] - closes[t - n]).abs();
        let path: f64 = (t - n + 1..=t).map(|i| (closes[i] - closes[i - 1]).abs()).sum();
        er[t] = if path > 0.0 {
            // Rounding can push the ratio a hair above one on monotone paths.
            (momentum / path).min(1.0)
        } else {
            0.0
        };
    }
    Ok(er)
}

pub fn smoothing_coefficient(er: f64, params: &KamaParams) -> f64 {
    let (k_s, k_l) = params.smoothing_constants();
    let offset = match params.coefficient_form {
        CoefficientForm::Conventional => k_l,
        CoefficientForm::AsPrinted => k_s,
    };
    let base = er * (k_s - k_l) + offset;
    base * base
}

/// `f_t = gamma * sd(x_{t-n+1..t})` with `x_t = KAMA_t - KAMA_{t-1}` and the
/// sample (n-1) divisor. `kama` must be fully defined; the output is `NaN`
/// until `n` increments exist, i.e. for indices below `n`.
pub fn filter_series(kama: &[f64], n: usize, gamma: f64) -> Vec<f64> {
    let mut out = vec![f64::NAN; kama.len()];
    if n < 2 {
        return out;
    }
    let inc: Vec<f64> = kama.windows(2).map(|w| w[1] - w[0]).collect();
    for t in n..kama.len() {
        // increments x_{t-n+1..t} live at inc[t-n..t]
        let window = &inc[t - n..t];
        let mean = window.iter().sum::<f64>() / n as f64;
        let ss: f64 = window.iter().map(|x| (x - mean) * (x - mean)).sum();
        out[t] = gamma * (ss / (n as f64 - 1.0)).sqrt();
    }
    out
}

/// KAMA seeded at index `n` with the mean of the first `n + 1` closes.
pub fn kama_series(dates: &[NaiveDate], closes: &[f64], params: &KamaParams) -> Result<KamaSeries> {
    params.validate()?;
    if dates.len() != closes.len() {
        return Err(Error::LengthMismatch {
            what: "dates vs closes",
            left: dates.len(),
            right: closes.len(),
        });
    }
    let needed = params.n.max(params.n_l) + 1;
    if closes.len() < needed {
        return Err(Error::TooShort {
            needed,
            got: closes.len(),
        });
    }
    let n = params.n;
    let er = efficiency_ratio(closes, n)?;
    let mut kama = vec![f64::NAN; closes.len()];
    kama[n] = closes[..=n].iter().sum::<f64>() / (n + 1) as f64;
    for t in n + 1..closes.len() {
        let c = smoothing_coefficient(er[t], params);
        kama[t] = kama[t - 1] + c * (closes[t] - kama[t - 1]);
    }
    let mut filter = vec![f64::NAN; closes.len()];
    for (slot, f) in filter[n..].iter_mut().zip(filter_series(&kama[n..], n, params.gamma)) {
        *slot = f;
    }
    Ok(KamaSeries {
        dates: dates.to_vec(),
        kama,
        er,
        filter,
        warmup_end: (2 * n).min(closes.len()),
    })
}

/// Persistent trend state driven by breakouts of KAMA beyond the filter
/// relative to the prior `n` KAMA values.
pub fn trend_signals(series: &KamaSeries, params: &KamaParams) -> Vec<TrendSignal> {
    let n = params.n;
    let len = series.kama.len();
    let mut out = vec![TrendSignal::Undefined; len];
    let mut state = TrendSignal::Undefined;
    for t in series.warmup_end.max(n)..len {
        let k = series.kama[t];
        let f = series.filter[t];
        if k.is_nan() || f.is_nan() {
            continue;
        }
        let prior = &series.kama[t - n..t];
        let low = prior.iter().copied().fold(f64::INFINITY, f64::min);
        let rise = k - low;
        let fall = match params.sell_reference {
            SellReference::Low => low - k,
            SellReference::High => prior.iter().copied().fold(f64::NEG_INFINITY, f64::max) - k,
        };
        let buy = rise > f;
        let sell = fall > f;
        state = match (buy, sell) {
            (true, false) => TrendSignal::Bullish,
            (false, true) => TrendSignal::Bearish,
            // Only reachable with the prior-high reference: the larger
            // breakout wins, an exact tie keeps the current state.
            (true, true) if rise > fall => TrendSignal::Bullish,
            (true, true) if fall > rise => TrendSignal::Bearish,
            _ => state,
        };
        out[t] = state;
    }
    out
}

fn opt_field(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

/// Writes `date,kama,er,filter,signal`.
pub fn write_kama_csv(path: &Path, series: &KamaSeries, signals: &[TrendSignal]) -> Result<()> {
    let mut buf = String::from("date,kama,er,filter,signal\n");
    for t in 0..series.kama.len() {
        buf.push_str(&format!(
            "{},{},{},{},{}\n",
            series.dates[t],
            opt_field(series.kama[t]),
            opt_field(series.er[t]),
            opt_field(series.filter[t]),
            signals.get(t).copied().unwrap_or(TrendSignal::Undefined).as_str()
        ));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))
}
