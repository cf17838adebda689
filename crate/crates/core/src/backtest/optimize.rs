//! Random search over the `(w_bull, w_bear)` allocation on a training window.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

use super::costs::ClassCost;
use super::metrics::{adjusted_sharpe, portfolio_returns, weighted_annual_return, AsrResult, PortfolioTrack};
use super::policy::{positions_from_labels, DayLabel, StrategyPolicy};

/// Metric maximised when choosing among the weight draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectBy {
    #[default]
    Asr,
    Returns,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrawRecord {
    pub draw: usize,
    pub w_bull: f64,
    pub w_bear: f64,
    pub asr: Option<f64>,
    pub weighted_annual_return: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimization {
    pub policy: StrategyPolicy,
    pub selected_draw: usize,
    /// Criterion actually used; differs from the requested one when every
    /// draw had an undefined ASR.
    pub selected_by: SelectBy,
    pub draws: Vec<DrawRecord>,
}

/// Uniform `(w_bull, w_bear)` pairs on `[0, 1]^2`. Draw `i` depends only on
/// `(seed, i)`, so every model sees the same sequence.
pub fn weight_draws(n: usize, seed: u64) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut r = rng::derived(seed, i as u64);
            (r.random::<f64>(), r.random::<f64>())
        })
        .collect()
}

/// Positions and portfolio track of a policy. `labels` has one entry per
/// price day and the return arrays one entry per day transition, so
/// `asset_returns.len() == labels.len() - 1`.
pub fn simulate(
    labels: &[DayLabel],
    asset_returns: &[f64],
    cash_returns: &[f64],
    policy: &StrategyPolicy,
    cost: &ClassCost,
) -> Result<(Vec<f64>, PortfolioTrack)> {
    if labels.len() != asset_returns.len() + 1 {
        return Err(Error::LengthMismatch {
            what: "day labels vs returns + 1",
            left: labels.len(),
            right: asset_returns.len() + 1,
        });
    }
    let positions = positions_from_labels(labels, policy)?;
    let track = portfolio_returns(asset_returns, cash_returns, &positions[..asset_returns.len()], cost)?;
    Ok((positions, track))
}

/// Inclusive runs of returns whose position was set by the same label.
/// Return `j` is held on the label of day `j - 1` (day 0 for `j = 0`).
pub fn label_spans(labels: &[DayLabel], n_returns: usize) -> Vec<(usize, usize, DayLabel)> {
    let mut spans: Vec<(usize, usize, DayLabel)> = Vec::new();
    for j in 0..n_returns {
        let l = labels[j.saturating_sub(1)];
        match spans.last_mut() {
            Some(last) if last.2 == l => last.1 = j,
            _ => spans.push((j, j, l)),
        }
    }
    spans
}

fn evaluate(
    labels: &[DayLabel],
    asset_returns: &[f64],
    cash_returns: &[f64],
    spans: &[(usize, usize)],
    policy: &StrategyPolicy,
    cost: &ClassCost,
) -> Result<(AsrResult, f64)> {
    let (_, track) = simulate(labels, asset_returns, cash_returns, policy, cost)?;
    Ok((
        adjusted_sharpe(&track.returns),
        weighted_annual_return(&track.returns, spans)?,
    ))
}

fn argmax_earliest(values: impl Iterator<Item = (usize, f64)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Evaluates every draw on the training window and keeps the best by
/// `select_by`, ties to the earliest draw.
pub fn optimize_weights(
    labels: &[DayLabel],
    asset_returns: &[f64],
    cash_returns: &[f64],
    skeleton: &StrategyPolicy,
    cost: &ClassCost,
    draws: &[(f64, f64)],
    select_by: SelectBy,
) -> Result<Optimization> {
    if draws.is_empty() {
        return Err(Error::Config("backtest.n_weight_draws must be at least 1".into()));
    }
    if asset_returns.is_empty() {
        return Err(Error::TooShort { needed: 2, got: labels.len() });
    }
    let spans: Vec<(usize, usize)> = label_spans(labels, asset_returns.len())
        .into_iter()
        .map(|(a, b, _)| (a, b))
        .collect();
    let records: Vec<DrawRecord> = draws
        .par_iter()
        .enumerate()
        .map(|(i, &(w_bull, w_bear))| {
            let policy = StrategyPolicy {
                w_bull,
                w_bear,
                ..*skeleton
            };
            let (asr, war) = evaluate(labels, asset_returns, cash_returns, &spans, &policy, cost)?;
            Ok(DrawRecord {
                draw: i,
                w_bull,
                w_bear,
                asr: asr.value,
                weighted_annual_return: war,
            })
        })
        .collect::<Result<_>>()?;

    let by_asr = || argmax_earliest(records.iter().filter_map(|r| r.asr.map(|a| (r.draw, a))));
    let by_returns = || argmax_earliest(records.iter().map(|r| (r.draw, r.weighted_annual_return)));
    let (selected_draw, selected_by) = match select_by {
        SelectBy::Asr => match by_asr() {
            Some(i) => (i, SelectBy::Asr),
            None => (by_returns().expect("non-empty draws"), SelectBy::Returns),
        },
        SelectBy::Returns => (by_returns().expect("non-empty draws"), SelectBy::Returns),
    };
    let chosen = records[selected_draw];
    Ok(Optimization {
        policy: StrategyPolicy {
            w_bull: chosen.w_bull,
            w_bear: chosen.w_bear,
            ..*skeleton
        },
        selected_draw,
        selected_by,
        draws: records,
    })
}
