//! Portfolio return composition with costs, annualised returns and the
//! adjusted Sharpe ratio.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::TRADING_DAYS;

use super::costs::ClassCost;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioTrack {
    /// Daily portfolio log returns net of costs.
    pub returns: Vec<f64>,
    /// Cost charged each day, as a simple-return fraction.
    pub costs: Vec<f64>,
    /// Total absolute weight traded.
    pub turnover: f64,
    /// Sum of daily costs.
    pub cost_drag: f64,
}

/// Composes daily returns from asset and cash legs. `weights[t]` is the asset
/// weight held over return `t`; the weight before the first day is 0. Any
/// change of weight is charged half the two-way cost per unit traded.
pub fn portfolio_returns(
    asset_returns: &[f64],
    cash_returns: &[f64],
    weights: &[f64],
    cost: &ClassCost,
) -> Result<PortfolioTrack> {
    if asset_returns.len() != cash_returns.len() || asset_returns.len() != weights.len() {
        return Err(Error::LengthMismatch {
            what: "asset returns, cash returns and weights",
            left: asset_returns.len(),
            right: weights.len().min(cash_returns.len()),
        });
    }
    let mut returns = Vec::with_capacity(weights.len());
    let mut costs = Vec::with_capacity(weights.len());
    let mut turnover = 0.0;
    let mut cost_drag = 0.0;
    let mut prev = 0.0;
    for t in 0..weights.len() {
        let w = weights[t];
        let delta = (w - prev).abs();
        let c = if delta > 0.0 { cost.per_side_fraction(delta) } else { 0.0 };
        let mut simple = w * asset_returns[t].exp_m1() - c;
        let cash_weight = 1.0 - w.abs();
        if cash_weight != 0.0 {
            simple += cash_weight * cash_returns[t].exp_m1();
        }
        returns.push(simple.ln_1p());
        costs.push(c);
        turnover += delta;
        cost_drag += c;
        prev = w;
    }
    Ok(PortfolioTrack {
        returns,
        costs,
        turnover,
        cost_drag,
    })
}

/// Day-weighted average of per-span annualised mean log returns. Spans are
/// inclusive index pairs into `daily_returns`.
pub fn weighted_annual_return(daily_returns: &[f64], spans: &[(usize, usize)]) -> Result<f64> {
    let mut total_days = 0usize;
    let mut acc = 0.0;
    for &(start, end) in spans {
        if start > end || end >= daily_returns.len() {
            return Err(Error::InvalidParameter(format!(
                "span ({start}, {end}) outside {} returns",
                daily_returns.len()
            )));
        }
        let n = end - start + 1;
        let annual = daily_returns[start..=end].iter().sum::<f64>() / n as f64 * TRADING_DAYS;
        acc += annual * n as f64;
        total_days += n;
    }
    if total_days == 0 {
        return Err(Error::InvalidParameter("no days covered by spans".into()));
    }
    Ok(acc / total_days as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AsrFlag {
    /// Fewer than two observations.
    TooFewObservations,
    ZeroVariance,
    /// No positive day exists; the ratio falls back to mean / std.
    NoPositiveReturns,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsrResult {
    /// `None` when the ratio is undefined.
    pub value: Option<f64>,
    /// Annualised mean return.
    pub mar: f64,
    /// Annualised mean of the positive days only.
    pub mar_plus: Option<f64>,
    /// Annualised sample volatility.
    pub sigma: f64,
    pub flag: Option<AsrFlag>,
}

/// `MAR / sigma^(MAR / MAR+)`, evaluated as `MAR * sigma^(-MAR / MAR+)`.
pub fn asr_closed_form(mar: f64, mar_plus: f64, sigma: f64) -> f64 {
    mar * sigma.powf(-mar / mar_plus)
}

/// Adjusted Sharpe ratio of daily returns with a zero risk-free rate.
pub fn adjusted_sharpe(daily_returns: &[f64]) -> AsrResult {
    let n = daily_returns.len();
    if n < 2 {
        return AsrResult {
            value: None,
            mar: daily_returns.first().map_or(0.0, |r| r * TRADING_DAYS),
            mar_plus: None,
            sigma: 0.0,
            flag: Some(AsrFlag::TooFewObservations),
        };
    }
    let mean = daily_returns.iter().sum::<f64>() / n as f64;
    let var = daily_returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let mar = mean * TRADING_DAYS;
    let sigma = var.sqrt() * TRADING_DAYS.sqrt();
    let positives: Vec<f64> = daily_returns.iter().copied().filter(|r| *r > 0.0).collect();
    let mar_plus = (!positives.is_empty())
        .then(|| positives.iter().sum::<f64>() / positives.len() as f64 * TRADING_DAYS);

    if !(sigma > 0.0) {
        return AsrResult {
            value: None,
            mar,
            mar_plus,
            sigma,
            flag: Some(AsrFlag::ZeroVariance),
        };
    }
    match mar_plus {
        Some(mp) => AsrResult {
            value: Some(asr_closed_form(mar, mp, sigma)),
            mar,
            mar_plus,
            sigma,
            flag: None,
        },
        None => AsrResult {
            value: Some(mar / sigma),
            mar,
            mar_plus: None,
            sigma,
            flag: Some(AsrFlag::NoPositiveReturns),
        },
    }
}
