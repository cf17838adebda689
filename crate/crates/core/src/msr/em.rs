//! Maximum-likelihood estimation by expectation-maximisation with seeded
//! random restarts.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

use super::filter::{hamilton_filter, kim_smoother, pairwise_transition_counts};
use super::{FitMeta, MsrFit, MsrParams, ProbMatrix};

/// Minimum expected number of days per state before a restart is abandoned.
const MIN_STATE_MASS: f64 = 2.0;
const MIN_SIGMA: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    pub restarts: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            tol: 1e-6,
            max_iter: 500,
        }
    }
}

/// Result of a single EM run from one starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct EmRun {
    pub params: MsrParams,
    /// Log-likelihood of the parameters entering each E-step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl EmRun {
    pub fn log_likelihood(&self) -> f64 {
        *self.trace.last().unwrap_or(&f64::NEG_INFINITY)
    }
}

/// Pooled least-squares fit of `r_t` on `(1, r_{t-1})`: (mu, beta, residuals).
fn pooled_ols(returns: &[f64]) -> (f64, f64, Vec<f64>) {
    let w = vec![1.0; returns.len() - 1];
    let (mu, beta) = weighted_regression(returns, &w);
    let resid = (1..returns.len())
        .map(|t| returns[t] - mu - beta * returns[t - 1])
        .collect();
    (mu, beta, resid)
}

/// Weighted least squares of `r_t` on `(1, r_{t-1})` for `t >= 1`, with
/// `weights[t - 1]` attached to day `t`.
fn weighted_regression(returns: &[f64], weights: &[f64]) -> (f64, f64) {
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (t, &w) in (1..returns.len()).zip(weights) {
        let (x, y) = (returns[t - 1], returns[t]);
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    // Centred second moment; collapses to zero when the regressor is constant
    // under the weights.
    let sxx_c = sxx - sx * sx / sw;
    if sxx_c <= 1e-14 * sxx.max(f64::MIN_POSITIVE) {
        return (sy / sw, 0.0);
    }
    let beta = (sxy - sx * sy / sw) / sxx_c;
    ((sy - beta * sx) / sw, beta)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Persistence-favouring random starting point for restart `stream`.
pub fn initial_params(returns: &[f64], k: usize, seed: u64, stream: u64) -> MsrParams {
    let mut rng = rng::derived(seed, stream);
    let (mu0, beta0, resid) = pooled_ols(returns);
    let scale = {
        let m = resid.iter().sum::<f64>() / resid.len() as f64;
        (resid.iter().map(|e| (e - m).powi(2)).sum::<f64>() / resid.len() as f64).sqrt()
    };
    let mut abs_resid: Vec<f64> = resid.iter().map(|e| e.abs()).collect();
    abs_resid.sort_by(f64::total_cmp);

    let jitter_mu = Normal::new(0.0, 0.1 * scale.max(MIN_SIGMA)).unwrap();
    let jitter_beta = Normal::new(0.0, 0.05).unwrap();
    let stay = Gamma::new(8.0, 1.0).unwrap();
    let leave = Gamma::new(2.0 / (k.max(2) - 1) as f64, 1.0).unwrap();

    let mut mu = Vec::with_capacity(k);
    let mut beta = Vec::with_capacity(k);
    let mut sigma = Vec::with_capacity(k);
    for i in 0..k {
        mu.push(mu0 + jitter_mu.sample(&mut rng));
        beta.push((beta0 + jitter_beta.sample(&mut rng)).clamp(-0.95, 0.95));
        // 1.4826 turns a median absolute deviation into a Gaussian sigma.
        let q = quantile(&abs_resid, (i as f64 + 0.5) / k as f64);
        let s = 1.4826 * q * rng.random_range(0.8..1.25);
        sigma.push(s.max(scale * 1e-3).max(MIN_SIGMA));
    }
    let transition = (0..k)
        .map(|r| {
            let mut row: Vec<f64> = (0..k)
                .map(|c| {
                    if c == r {
                        stay.sample(&mut rng)
                    } else {
                        leave.sample(&mut rng)
                    }
                })
                .collect();
            normalize(&mut row);
            row
        })
        .collect();
    MsrParams {
        k,
        mu,
        beta,
        sigma,
        transition,
        delta: vec![1.0 / k as f64; k],
    }
}

fn normalize(row: &mut [f64]) {
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= s);
    // Push any rounding residue into the largest entry.
    let resid = 1.0 - row.iter().sum::<f64>();
    if let Some(m) = row
        .iter_mut()
        .max_by(|a, b| a.total_cmp(b))
    {
        *m += resid;
    }
}

struct EStep {
    log_likelihood: f64,
    smoothed: ProbMatrix,
    counts: Vec<Vec<f64>>,
}

fn e_step(params: &MsrParams, returns: &[f64]) -> Result<EStep> {
    let out = hamilton_filter(params, returns)?;
    let smoothed = kim_smoother(params, &out.filtered)?;
    let counts = pairwise_transition_counts(params, &out.filtered, &smoothed);
    Ok(EStep {
        log_likelihood: out.log_likelihood,
        smoothed,
        counts,
    })
}

fn m_step(returns: &[f64], k: usize, e: &EStep) -> Result<MsrParams> {
    let mut mu = Vec::with_capacity(k);
    let mut beta = Vec::with_capacity(k);
    let mut sigma = Vec::with_capacity(k);
    for i in 0..k {
        let w: Vec<f64> = e.smoothed.iter().map(|row| row[i]).collect();
        let mass: f64 = w.iter().sum();
        if mass < MIN_STATE_MASS {
            return Err(Error::Estimation(format!(
                "state {i} collapsed (expected count {mass:.3})"
            )));
        }
        let (m, b) = weighted_regression(returns, &w);
        let rss: f64 = (1..returns.len())
            .zip(&w)
            .map(|(t, wt)| wt * (returns[t] - m - b * returns[t - 1]).powi(2))
            .sum();
        let s = (rss / mass).sqrt();
        if !(s > MIN_SIGMA) {
            return Err(Error::Estimation(format!("state {i} variance collapsed")));
        }
        mu.push(m);
        beta.push(b);
        sigma.push(s);
    }
    let transition = e
        .counts
        .iter()
        .map(|row| {
            let mut row = row.clone();
            if row.iter().sum::<f64>() > 0.0 {
                normalize(&mut row);
            } else {
                row = vec![1.0 / k as f64; k];
            }
            row
        })
        .collect();
    let mut delta = e.smoothed[0].clone();
    normalize(&mut delta);
    Ok(MsrParams {
        k,
        mu,
        beta,
        sigma,
        transition,
        delta,
    })
}

/// Runs EM from `init` until the log-likelihood gain drops below `tol` or
/// `max_iter` E-steps have been taken.
pub fn em_run(returns: &[f64], init: MsrParams, tol: f64, max_iter: usize) -> Result<EmRun> {
    let k = init.k;
    let mut params = init;
    let mut trace = Vec::new();
    let mut converged = false;
    for iter in 0..max_iter.max(1) {
        let e = e_step(&params, returns)?;
        trace.push(e.log_likelihood);
        if iter > 0 && e.log_likelihood - trace[iter - 1] < tol {
            converged = true;
            break;
        }
        if iter + 1 == max_iter.max(1) {
            break;
        }
        params = m_step(returns, k, &e)?;
    }
    Ok(EmRun {
        iterations: trace.len(),
        params,
        trace,
        converged,
    })
}

/// Best of `cfg.restarts` seeded EM runs, states sorted by volatility.
///
/// Restarts run in parallel; the winner is the highest final likelihood with
/// ties going to the lowest restart index, so the outcome does not depend on
/// scheduling.
pub fn em_fit(returns: &[f64], k: usize, cfg: &EmConfig, seed: u64) -> Result<MsrFit> {
    if !(k == 2 || k == 3) {
        return Err(Error::InvalidParameter(format!("k must be 2 or 3, got {k}")));
    }
    if returns.len() < 50 {
        return Err(Error::TooShort {
            needed: 50,
            got: returns.len(),
        });
    }
    if cfg.restarts == 0 {
        return Err(Error::InvalidParameter("restarts must be at least 1".into()));
    }
    if let Some(i) = returns.iter().position(|r| !r.is_finite()) {
        return Err(Error::NonFinite(i));
    }

    let runs: Vec<Result<EmRun>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let init = initial_params(returns, k, seed, r as u64);
            em_run(returns, init, cfg.tol, cfg.max_iter)
        })
        .collect();

    let mut best: Option<(usize, &EmRun)> = None;
    for (i, run) in runs.iter().enumerate() {
        if let Ok(run) = run {
            let ll = run.log_likelihood();
            if ll.is_finite() && best.is_none_or(|(_, b)| ll > b.log_likelihood()) {
                best = Some((i, run));
            }
        }
    }
    let Some((best_restart, run)) = best else {
        let reasons: Vec<String> = runs
            .iter()
            .filter_map(|r| r.as_ref().err().map(ToString::to_string))
            .collect();
        return Err(Error::Estimation(format!(
            "all {} EM restarts failed: {}",
            cfg.restarts,
            reasons.join("; ")
        )));
    };

    let params = run.params.sorted_by_sigma();
    let out = hamilton_filter(&params, returns)?;
    let smoothed = kim_smoother(&params, &out.filtered)?;
    Ok(MsrFit {
        params,
        filtered: out.filtered,
        smoothed,
        log_likelihood: out.log_likelihood,
        meta: FitMeta {
            seed,
            restarts: cfg.restarts,
            iterations: run.iterations,
            converged: run.converged,
            best_restart,
            restart_log_likelihoods: runs
                .iter()
                .map(|r| r.as_ref().ok().map(EmRun::log_likelihood))
                .collect(),
            traces: runs
                .iter()
                .map(|r| r.as_ref().map(|r| r.trace.clone()).unwrap_or_default())
                .collect(),
        },
    })
}
