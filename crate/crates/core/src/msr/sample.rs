//! Seeded simulation from a switching regression, used as a test oracle and
//! by the synthetic-data command.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng;

use super::MsrParams;

#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    /// State of each day, aligned with `returns`.
    pub states: Vec<usize>,
    pub returns: Vec<f64>,
}

fn draw_categorical<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap above the cumulative sum.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Draws `len` days: `s_0 ~ delta`, then the chain, with returns from the
/// state's regression on the previous return. `r_0` comes from the
/// stationary distribution of state `s_0`'s autoregression (plain
/// `N(mu, sigma^2)` when `|beta| >= 1`).
pub fn sample_path(params: &MsrParams, len: usize, seed: u64) -> Result<SampledPath> {
    params.validate()?;
    if len < 2 {
        return Err(Error::TooShort { needed: 2, got: len });
    }
    let mut rng = rng::derived(seed, 0);
    let mut states = Vec::with_capacity(len);
    let mut returns = Vec::with_capacity(len);

    let s0 = draw_categorical(&mut rng, &params.delta);
    let (mu, beta, sigma) = (params.mu[s0], params.beta[s0], params.sigma[s0]);
    let z: f64 = StandardNormal.sample(&mut rng);
    let r0 = if beta.abs() < 1.0 {
        mu / (1.0 - beta) + sigma / (1.0 - beta * beta).sqrt() * z
    } else {
        mu + sigma * z
    };
    states.push(s0);
    returns.push(r0);

    for t in 1..len {
        let s = draw_categorical(&mut rng, &params.transition[states[t - 1]]);
        let z: f64 = StandardNormal.sample(&mut rng);
        let r = params.mu[s] + params.beta[s] * returns[t - 1] + params.sigma[s] * z;
        states.push(s);
        returns.push(r);
    }
    Ok(SampledPath { states, returns })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absorbing_start_stays_put() {
        let p = MsrParams {
            k: 2,
            mu: vec![0.0, 0.0],
            beta: vec![0.0, 0.0],
            sigma: vec![0.01, 0.02],
            transition: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            delta: vec![1.0, 0.0],
        };
        let path = sample_path(&p, 1000, 4).unwrap();
        assert!(path.states.iter().all(|&s| s == 0));
    }

    #[test]
    fn indistinguishable_states_give_iid_gaussian() {
        let p = MsrParams {
            k: 2,
            mu: vec![0.0, 0.0],
            beta: vec![0.0, 0.0],
            sigma: vec![0.01, 0.01],
            transition: vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            delta: vec![0.5, 0.5],
        };
        let path = sample_path(&p, 200_000, 8).unwrap();
        let n = path.returns.len() as f64;
        let mean = path.returns.iter().sum::<f64>() / n;
        let var = path.returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // 5 standard errors on mean and variance
        assert!(mean.abs() < 5.0 * 0.01 / n.sqrt());
        assert!((var - 1e-4).abs() < 5.0 * 1e-4 * (2.0 / n).sqrt());
        let lag1: f64 = path.returns.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / (n - 1.0);
        assert!((lag1 / var).abs() < 5.0 / n.sqrt());
    }

    #[test]
    fn empirical_transitions_match_matrix() {
        let p = MsrParams {
            k: 3,
            mu: vec![0.0; 3],
            beta: vec![0.0; 3],
            sigma: vec![0.01, 0.02, 0.03],
            transition: vec![
                vec![0.8, 0.15, 0.05],
                vec![0.1, 0.7, 0.2],
                vec![0.25, 0.25, 0.5],
            ],
            delta: vec![1.0, 0.0, 0.0],
        };
        let path = sample_path(&p, 100_000, 17).unwrap();
        let mut counts = vec![vec![0.0; 3]; 3];
        for w in path.states.windows(2) {
            counts[w[0]][w[1]] += 1.0;
        }
        for (r, row) in counts.iter().enumerate() {
            let total: f64 = row.iter().sum();
            for c in 0..3 {
                assert!((row[c] / total - p.transition[r][c]).abs() < 0.01);
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let p = crate::msr::tests::two_state();
        assert_eq!(sample_path(&p, 300, 5).unwrap(), sample_path(&p, 300, 5).unwrap());
        assert_ne!(sample_path(&p, 300, 5).unwrap(), sample_path(&p, 300, 6).unwrap());
        assert!(sample_path(&p, 1, 5).is_err());
    }
}
