//! Regime-driven asset/cash allocation, transaction costs, performance
//! metrics, weight optimisation and the cross-model winning score.
//!
//! Day conventions: labels and positions have one entry per price day, and
//! return `j` (from day `j` to day `j + 1`) is earned on the position held at
//! day `j`, which was set from the label of day `j - 1`.

mod compare;
mod costs;
mod metrics;
mod optimize;
mod policy;

use std::ops::Range;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::TRADING_DAYS;

pub use compare::{
    combined_score, compare, compare_asset, winning_score, AssetComparison, AssetScores, ClassBlock,
    ComparisonReport, MetricComparison, ModelScore,
};
pub use costs::{ClassCost, CostSchedule};
pub use metrics::{
    adjusted_sharpe, asr_closed_form, portfolio_returns, weighted_annual_return, AsrFlag, AsrResult, PortfolioTrack,
};
pub use optimize::{label_spans, optimize_weights, simulate, weight_draws, DrawRecord, Optimization, SelectBy};
pub use policy::{positions_from_labels, BearMode, DayLabel, ModelId, StrategyPolicy};

/// Performance over one run of returns driven by a single label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfSegment {
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub label: String,
    pub n_days: usize,
    pub annual_return: f64,
    pub cumulative_log_return: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestResult {
    pub policy: StrategyPolicy,
    /// Date at the end of each evaluated return.
    pub dates: Vec<NaiveDate>,
    pub daily_portfolio_returns: Vec<f64>,
    /// Asset weight held over each evaluated return.
    pub positions: Vec<f64>,
    /// Day-weighted mean of per-segment annualised returns.
    pub weighted_annual_return: f64,
    /// `252 *` mean daily return over the whole window.
    pub whole_period_annual_return: f64,
    pub adjusted_sharpe: AsrResult,
    pub turnover: f64,
    pub cost_drag: f64,
    pub per_segment: Vec<PerfSegment>,
}

/// Simulates `policy` over the full series and reports the returns in
/// `window` (indices into the return arrays). Positions entering the window
/// carry over from before it.
pub fn evaluate_window(
    labels: &[DayLabel],
    asset_returns: &[f64],
    cash_returns: &[f64],
    return_dates: &[NaiveDate],
    policy: &StrategyPolicy,
    cost: &ClassCost,
    window: Range<usize>,
) -> Result<BacktestResult> {
    if return_dates.len() != asset_returns.len() {
        return Err(Error::LengthMismatch {
            what: "return dates vs returns",
            left: return_dates.len(),
            right: asset_returns.len(),
        });
    }
    if window.is_empty() || window.end > asset_returns.len() {
        return Err(Error::Config(format!(
            "evaluation window {}..{} is empty or exceeds {} returns",
            window.start,
            window.end,
            asset_returns.len()
        )));
    }
    let (positions, track) = simulate(labels, asset_returns, cash_returns, policy, cost)?;
    let returns = track.returns[window.clone()].to_vec();
    let turnover: f64 = window
        .clone()
        .map(|j| (positions[j] - if j == 0 { 0.0 } else { positions[j - 1] }).abs())
        .sum();
    let cost_drag: f64 = track.costs[window.clone()].iter().sum();

    let spans: Vec<(usize, usize, DayLabel)> = label_spans(labels, asset_returns.len())
        .into_iter()
        .filter(|s| s.1 >= window.start && s.0 < window.end)
        .map(|(a, b, l)| (a.max(window.start) - window.start, b.min(window.end - 1) - window.start, l))
        .collect();
    let bounds: Vec<(usize, usize)> = spans.iter().map(|s| (s.0, s.1)).collect();
    let dates = return_dates[window.clone()].to_vec();
    let per_segment = spans
        .iter()
        .map(|&(a, b, l)| {
            let sum: f64 = returns[a..=b].iter().sum();
            let n = b - a + 1;
            PerfSegment {
                start_date: dates[a],
                end_date: dates[b],
                label: l.name(),
                n_days: n,
                annual_return: sum / n as f64 * TRADING_DAYS,
                cumulative_log_return: sum,
            }
        })
        .collect();
    Ok(BacktestResult {
        policy: *policy,
        weighted_annual_return: weighted_annual_return(&returns, &bounds)?,
        whole_period_annual_return: returns.iter().sum::<f64>() / returns.len() as f64 * TRADING_DAYS,
        adjusted_sharpe: adjusted_sharpe(&returns),
        positions: positions[window].to_vec(),
        dates,
        daily_portfolio_returns: returns,
        turnover,
        cost_drag,
        per_segment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::business_days;
    use crate::regime::RegimeLabel::*;

    #[test]
    fn window_slices_full_simulation() {
        let labels: Vec<DayLabel> = [LowVarBull, LowVarBull, HighVarBear, HighVarBear, LowVarBull, LowVarBull]
            .map(DayLabel::Regime)
            .to_vec();
        let r = [0.01, -0.005, 0.02, -0.01, 0.003];
        let cash = [0.0001; 5];
        let dates = business_days(NaiveDate::from_ymd_opt(2021, 3, 1).unwrap(), 5);
        let policy = StrategyPolicy {
            model_id: ModelId::KamaMsr,
            w_bull: 0.8,
            w_bear: 0.4,
            bear_mode: BearMode::Short,
        };
        let cost = CostSchedule::default().equities;
        let full = evaluate_window(&labels, &r, &cash, &dates, &policy, &cost, 0..5).unwrap();
        let tail = evaluate_window(&labels, &r, &cash, &dates, &policy, &cost, 3..5).unwrap();
        assert_eq!(&full.daily_portfolio_returns[3..], &tail.daily_portfolio_returns[..]);
        assert_eq!(full.positions, vec![0.0, 0.8, 0.8, -0.4, -0.4]);
        assert!((full.turnover - 2.0).abs() < 1e-15);
        assert!((tail.turnover - 1.2).abs() < 1e-15);
        assert_eq!(full.per_segment.iter().map(|s| s.n_days).sum::<usize>(), 5);
        assert!((full.weighted_annual_return - full.whole_period_annual_return).abs() < 1e-12);
        assert!(evaluate_window(&labels, &r, &cash, &dates, &policy, &cost, 5..5).is_err());
    }
}
