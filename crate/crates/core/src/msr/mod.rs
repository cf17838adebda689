//! k-state Markov-switching dynamic regression.
//!
//! Daily log returns follow
//!
//! ```text
//! r_t = mu[s_t] + beta[s_t] * r_{t-1} + sigma[s_t] * eps_t,   eps_t ~ N(0, 1)
//! ```
//!
//! with `s_t` a time-homogeneous Markov chain. The first return is only used
//! as the lag regressor of the second, so every probability track produced
//! here has `T - 1` rows: row `j` belongs to return index `j + 1`.
//!
//! States are always reported sorted by ascending volatility; state 0 is the
//! low-volatility regime.

mod em;
mod filter;
mod sample;

use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use em::{em_fit, em_run, initial_params, EmConfig, EmRun};
pub use filter::{hamilton_filter, kim_smoother, pairwise_transition_counts, FilterOutput};
pub use sample::{sample_path, SampledPath};

/// Row-major probability matrix, one row per modelled day.
pub type ProbMatrix = Vec<Vec<f64>>;

const SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsrParams {
    pub k: usize,
    pub mu: Vec<f64>,
    pub beta: Vec<f64>,
    pub sigma: Vec<f64>,
    /// `transition[r][c] = Pr(s_t = c | s_{t-1} = r)`.
    pub transition: Vec<Vec<f64>>,
    pub delta: Vec<f64>,
}

impl MsrParams {
    /// Checks shapes, positivity of the volatilities and stochasticity of the
    /// transition matrix and initial distribution. Ordering by `sigma` is not
    /// required here; see [`MsrParams::sorted_by_sigma`].
    pub fn validate(&self) -> Result<()> {
        let k = self.k;
        if !(1..=3).contains(&k) {
            return Err(Error::InvalidParameter(format!("k must be 1, 2 or 3, got {k}")));
        }
        let shapes_ok = self.mu.len() == k
            && self.beta.len() == k
            && self.sigma.len() == k
            && self.delta.len() == k
            && self.transition.len() == k
            && self.transition.iter().all(|row| row.len() == k);
        if !shapes_ok {
            return Err(Error::InvalidParameter(format!(
                "parameter vectors must all have length k = {k}"
            )));
        }
        if let Some(i) = self.sigma.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "sigma[{i}] = {} is not positive",
                self.sigma[i]
            )));
        }
        if self.mu.iter().chain(&self.beta).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite mu or beta".into()));
        }
        for (r, row) in self.transition.iter().enumerate() {
            check_distribution(row, &format!("transition row {r}"))?;
        }
        check_distribution(&self.delta, "delta")
    }

    /// Permutes states so that `sigma` is non-decreasing (stable on ties).
    pub fn sorted_by_sigma(&self) -> MsrParams {
        let order = self.sigma_order();
        self.permuted(&order)
    }

    /// State indices ordered by ascending sigma, ties by index.
    pub fn sigma_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.k).collect();
        order.sort_by(|&a, &b| self.sigma[a].total_cmp(&self.sigma[b]));
        order
    }

    /// New state `i` is old state `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> MsrParams {
        MsrParams {
            k: self.k,
            mu: order.iter().map(|&i| self.mu[i]).collect(),
            beta: order.iter().map(|&i| self.beta[i]).collect(),
            sigma: order.iter().map(|&i| self.sigma[i]).collect(),
            transition: order
                .iter()
                .map(|&r| order.iter().map(|&c| self.transition[r][c]).collect())
                .collect(),
            delta: order.iter().map(|&i| self.delta[i]).collect(),
        }
    }

    pub fn is_sorted_by_sigma(&self) -> bool {
        self.sigma.windows(2).all(|w| w[0] <= w[1])
    }
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidParameter(format!("{what} has entries outside [0,1]")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidParameter(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

/// Bookkeeping recorded alongside a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub seed: u64,
    pub restarts: usize,
    /// EM iterations of the selected restart.
    pub iterations: usize,
    pub converged: bool,
    pub best_restart: usize,
    /// Final log-likelihood per restart; `None` where the restart aborted.
    pub restart_log_likelihoods: Vec<Option<f64>>,
    /// Per-iteration log-likelihood of every restart (empty for aborted ones).
    #[serde(skip)]
    pub traces: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsrFit {
    pub params: MsrParams,
    pub filtered: ProbMatrix,
    pub smoothed: ProbMatrix,
    pub log_likelihood: f64,
    pub meta: FitMeta,
}

/// On-disk model description; probability tracks live in separate CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub k: usize,
    pub mu: Vec<f64>,
    pub beta: Vec<f64>,
    pub sigma: Vec<f64>,
    pub transition: Vec<Vec<f64>>,
    pub delta: Vec<f64>,
    pub log_likelihood: f64,
    pub meta: FitMeta,
}

impl SavedModel {
    pub fn from_fit(fit: &MsrFit) -> Self {
        let p = &fit.params;
        SavedModel {
            k: p.k,
            mu: p.mu.clone(),
            beta: p.beta.clone(),
            sigma: p.sigma.clone(),
            transition: p.transition.clone(),
            delta: p.delta.clone(),
            log_likelihood: fit.log_likelihood,
            meta: fit.meta.clone(),
        }
    }

    pub fn params(&self) -> MsrParams {
        MsrParams {
            k: self.k,
            mu: self.mu.clone(),
            beta: self.beta.clone(),
            sigma: self.sigma.clone(),
            transition: self.transition.clone(),
            delta: self.delta.clone(),
        }
    }
}

/// Recomputes the probability tracks of a saved model on `returns`.
pub fn refit_tracks(saved: &SavedModel, returns: &[f64]) -> Result<MsrFit> {
    let params = saved.params();
    params.validate()?;
    let out = hamilton_filter(&params, returns)?;
    let smoothed = kim_smoother(&params, &out.filtered)?;
    Ok(MsrFit {
        params,
        filtered: out.filtered,
        smoothed,
        log_likelihood: out.log_likelihood,
        meta: saved.meta.clone(),
    })
}

/// Collapses a three-state probability track to low (0) / high (1) labels by
/// discarding the medium-volatility state and comparing the two outer states.
/// Ties go to the low state.
pub fn reduce_three_to_two(probs: &[Vec<f64>], sigma: &[f64]) -> Result<Vec<u8>> {
    if sigma.len() != 3 {
        return Err(Error::InvalidParameter(format!(
            "three-state reduction needs k = 3, got {}",
            sigma.len()
        )));
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| sigma[a].total_cmp(&sigma[b]));
    let (low, high) = (order[0], order[2]);
    probs
        .iter()
        .map(|row| {
            if row.len() != 3 {
                return Err(Error::LengthMismatch {
                    what: "probability row width",
                    left: row.len(),
                    right: 3,
                });
            }
            Ok(if row[high] > row[low] { 1 } else { 0 })
        })
        .collect()
}

/// Writes `date,p_state0,...` rows. `dates[j]` labels row `j`.
pub fn write_probabilities_csv(path: &Path, dates: &[NaiveDate], probs: &[Vec<f64>]) -> Result<()> {
    if dates.len() != probs.len() {
        return Err(Error::LengthMismatch {
            what: "probability dates vs rows",
            left: dates.len(),
            right: probs.len(),
        });
    }
    let k = probs.first().map_or(0, Vec::len);
    let mut buf = String::from("date");
    for i in 0..k {
        buf.push_str(&format!(",p_state{i}"));
    }
    buf.push('\n');
    for (d, row) in dates.iter().zip(probs) {
        buf.push_str(&d.to_string());
        for p in row {
            buf.push_str(&format!(",{p}"));
        }
        buf.push('\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))
}
