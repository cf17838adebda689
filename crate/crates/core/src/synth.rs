//! Synthetic price series with a known hidden truth.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{business_days, AssetClass, PriceSeries};
use crate::msr::{sample_path, MsrParams};
use crate::regime::RegimeLabel;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Two variance states, `mu = (0.0005, -0.001)`, `sigma = (0.005, 0.02)`,
    /// `p = q = 0.98`.
    TwoState,
    /// Three variance states with persistent transitions.
    ThreeState,
    /// Drift episodes planted with the four composite regime labels; each
    /// episode changes either the trend direction or the volatility of the
    /// previous one.
    TrendRegimes,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::TwoState => "two_state",
            Scenario::ThreeState => "three_state",
            Scenario::TrendRegimes => "trend_regimes",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two_state" => Ok(Scenario::TwoState),
            "three_state" => Ok(Scenario::ThreeState),
            "trend_regimes" => Ok(Scenario::TrendRegimes),
            _ => Err(Error::Config(format!(
                "unknown scenario `{s}` (expected two_state, three_state or trend_regimes)"
            ))),
        }
    }
}

/// Parameters of the `two_state` scenario.
pub fn two_state_params() -> MsrParams {
    MsrParams {
        k: 2,
        mu: vec![0.0005, -0.001],
        beta: vec![0.0, 0.0],
        sigma: vec![0.005, 0.02],
        transition: vec![vec![0.98, 0.02], vec![0.02, 0.98]],
        delta: vec![0.5, 0.5],
    }
}

/// Parameters of the `three_state` scenario.
pub fn three_state_params() -> MsrParams {
    MsrParams {
        k: 3,
        mu: vec![0.0004, 0.0, -0.0006],
        beta: vec![0.05, 0.0, -0.05],
        sigma: vec![0.004, 0.01, 0.025],
        transition: vec![
            vec![0.98, 0.015, 0.005],
            vec![0.015, 0.97, 0.015],
            vec![0.005, 0.015, 0.98],
        ],
        delta: vec![1.0 / 3.0; 3],
    }
}

/// Daily drift and volatility planted for each regime in `trend_regimes`.
pub fn regime_dynamics(label: RegimeLabel) -> (f64, f64) {
    match label {
        RegimeLabel::LowVarBull => (0.0025, 0.005),
        RegimeLabel::LowVarBear => (-0.0025, 0.005),
        RegimeLabel::HighVarBull => (0.005, 0.015),
        RegimeLabel::HighVarBear => (-0.005, 0.015),
        RegimeLabel::Undefined => (0.0, 0.0),
    }
}

/// Episode length bounds (days) in `trend_regimes`.
pub const EPISODE_DAYS: (usize, usize) = (150, 300);

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub prices: PriceSeries,
    /// Planted state of each price day (the state of the return ending on
    /// that day); `None` for the first day.
    pub states: Vec<Option<usize>>,
    /// Planted composite label per price day, `trend_regimes` only.
    pub labels: Option<Vec<RegimeLabel>>,
}

fn prices_from_returns(id: &str, returns: &[f64]) -> Result<PriceSeries> {
    let dates = business_days(NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date"), returns.len() + 1);
    let mut closes = Vec::with_capacity(returns.len() + 1);
    let mut log_level = 100f64.ln();
    closes.push(100.0);
    for r in returns {
        log_level += r;
        closes.push(log_level.exp());
    }
    PriceSeries::new(id, AssetClass::Equities, dates, closes)
}

/// Generates `n_days` closes starting at 100.
pub fn generate(scenario: Scenario, n_days: usize, seed: u64) -> Result<SynthOutput> {
    if n_days < 2 {
        return Err(Error::InvalidParameter(format!(
            "synthetic series needs at least 2 days, got {n_days}"
        )));
    }
    let n_returns = n_days - 1;
    let seed = rng::sub_seed(seed, scenario.as_str());
    let id = scenario.as_str();
    match scenario {
        Scenario::TwoState | Scenario::ThreeState => {
            let params = if scenario == Scenario::TwoState {
                two_state_params()
            } else {
                three_state_params()
            };
            // A single return cannot be sampled with a lag; draw two and
            // keep the second.
            let path = sample_path(&params, n_returns.max(2), seed)?;
            let skip = path.returns.len() - n_returns;
            let returns = &path.returns[skip..];
            let mut states = vec![None];
            states.extend(path.states[skip..].iter().map(|&s| Some(s)));
            Ok(SynthOutput {
                prices: prices_from_returns(id, returns)?,
                states,
                labels: None,
            })
        }
        Scenario::TrendRegimes => {
            let mut rng = rng::derived(seed, 0);
            let mut returns = Vec::with_capacity(n_returns);
            let mut states = vec![None];
            let mut label_idx = rng.random_range(0..4);
            let mut episode = 0u64;
            while returns.len() < n_returns {
                let len = rng.random_range(EPISODE_DAYS.0..=EPISODE_DAYS.1).min(n_returns - returns.len());
                let label = RegimeLabel::ACTIVE[label_idx];
                let (mu, sigma) = regime_dynamics(label);
                let params = MsrParams {
                    k: 1,
                    mu: vec![mu],
                    beta: vec![0.0],
                    sigma: vec![sigma],
                    transition: vec![vec![1.0]],
                    delta: vec![1.0],
                };
                let path = sample_path(&params, len.max(2), rng::sub_seed(seed, "episode") ^ episode)?;
                returns.extend_from_slice(&path.returns[..len]);
                states.extend(std::iter::repeat_n(Some(label_idx), len));
                // ACTIVE is ordered so that bit 0 is the direction and bit 1
                // the volatility.
                label_idx ^= rng.random_range(1..=2usize);
                episode += 1;
            }
            let labels = states
                .iter()
                .enumerate()
                .map(|(d, s)| match s {
                    Some(i) => RegimeLabel::ACTIVE[*i],
                    // The first day takes the label of the episode it opens.
                    None => RegimeLabel::ACTIVE[states.get(d + 1).copied().flatten().unwrap_or(0)],
                })
                .collect();
            Ok(SynthOutput {
                prices: prices_from_returns(id, &returns)?,
                states,
                labels: Some(labels),
            })
        }
    }
}

/// Writes the planted truth as `date,state[,label]`.
pub fn write_truth_csv(path: &Path, out: &SynthOutput) -> Result<()> {
    let mut buf = String::from(if out.labels.is_some() { "date,state,label\n" } else { "date,state\n" });
    for (d, date) in out.prices.dates.iter().enumerate() {
        let state = out.states[d].map(|s| s.to_string()).unwrap_or_default();
        buf.push_str(&format!("{date},{state}"));
        if let Some(labels) = &out.labels {
            buf.push(',');
            buf.push_str(labels[d].as_str());
        }
        buf.push('\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))
}
