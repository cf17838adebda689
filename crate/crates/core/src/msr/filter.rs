//! Hamilton filter and Kim smoother in normalised form.

use crate::error::{Error, Result};

use super::{MsrParams, ProbMatrix};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;
const PRED_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    /// `filtered[j][i] = Pr(s = i | r_0..r_{j+1})`.
    pub filtered: ProbMatrix,
    /// One-step-ahead state predictions; `predicted[0]` is `delta`.
    pub predicted: ProbMatrix,
    pub log_likelihood: f64,
}

#[inline]
pub(crate) fn log_emission(params: &MsrParams, state: usize, y: f64, x: f64) -> f64 {
    let z = (y - params.mu[state] - params.beta[state] * x) / params.sigma[state];
    -LN_SQRT_2PI - params.sigma[state].ln() - 0.5 * z * z
}

#[inline]
fn propagate(prev: &[f64], transition: &[Vec<f64>], out: &mut [f64]) {
    for (j, o) in out.iter_mut().enumerate() {
        *o = prev.iter().zip(transition).map(|(p, row)| p * row[j]).sum();
    }
}

/// Forward recursion over returns `r_1..r_{T-1}`, with `r_0` serving as the
/// first lag regressor and `delta` as the prior of the first modelled state.
pub fn hamilton_filter(params: &MsrParams, returns: &[f64]) -> Result<FilterOutput> {
    params.validate()?;
    if returns.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: returns.len(),
        });
    }
    if let Some(i) = returns.iter().position(|r| !r.is_finite()) {
        return Err(Error::NonFinite(i));
    }

    let k = params.k;
    let n = returns.len() - 1;
    let mut filtered: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut predicted = Vec::with_capacity(n);
    let mut log_likelihood = 0.0;
    let mut pred = params.delta.clone();
    let mut logd = vec![0.0; k];

    for t in 1..returns.len() {
        let (y, x) = (returns[t], returns[t - 1]);
        if t > 1 {
            propagate(filtered.last().unwrap(), &params.transition, &mut pred);
        }
        // Shift by the largest attainable log-density so the normaliser never
        // underflows.
        let mut max = f64::NEG_INFINITY;
        for i in 0..k {
            logd[i] = log_emission(params, i, y, x);
            if pred[i] > 0.0 && logd[i] > max {
                max = logd[i];
            }
        }
        let mut joint: Vec<f64> = (0..k).map(|i| pred[i] * (logd[i] - max).exp()).collect();
        let c: f64 = joint.iter().sum();
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Estimation(format!("degenerate filter normaliser at t = {t}")));
        }
        joint.iter_mut().for_each(|v| *v /= c);
        log_likelihood += c.ln() + max;
        predicted.push(pred.clone());
        filtered.push(joint);
    }

    Ok(FilterOutput {
        filtered,
        predicted,
        log_likelihood,
    })
}

/// Backward recursion giving `Pr(s = i | all returns)`.
pub fn kim_smoother(params: &MsrParams, filtered: &[Vec<f64>]) -> Result<ProbMatrix> {
    let k = params.k;
    if filtered.is_empty() {
        return Ok(Vec::new());
    }
    if let Some(row) = filtered.iter().find(|r| r.len() != k) {
        return Err(Error::LengthMismatch {
            what: "filtered row width vs k",
            left: row.len(),
            right: k,
        });
    }
    let n = filtered.len();
    let mut smoothed = vec![vec![0.0; k]; n];
    smoothed[n - 1] = filtered[n - 1].clone();
    let mut pred = vec![0.0; k];
    for t in (0..n - 1).rev() {
        propagate(&filtered[t], &params.transition, &mut pred);
        let ratio: Vec<f64> = (0..k)
            .map(|j| smoothed[t + 1][j] / pred[j].max(PRED_FLOOR))
            .collect();
        let mut row: Vec<f64> = (0..k)
            .map(|i| {
                let back: f64 = (0..k).map(|j| params.transition[i][j] * ratio[j]).sum();
                filtered[t][i] * back
            })
            .collect();
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        }
        smoothed[t] = row;
    }
    Ok(smoothed)
}

/// Expected transition counts `sum_t Pr(s_t = i, s_{t+1} = j | all data)`
/// over consecutive modelled days.
pub fn pairwise_transition_counts(
    params: &MsrParams,
    filtered: &[Vec<f64>],
    smoothed: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let k = params.k;
    let mut counts = vec![vec![0.0; k]; k];
    let mut pred = vec![0.0; k];
    for t in 0..filtered.len().saturating_sub(1) {
        propagate(&filtered[t], &params.transition, &mut pred);
        for j in 0..k {
            let ratio = smoothed[t + 1][j] / pred[j].max(PRED_FLOOR);
            for i in 0..k {
                counts[i][j] += filtered[t][i] * params.transition[i][j] * ratio;
            }
        }
    }
    counts
}
