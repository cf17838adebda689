//! Shared test oracles.

#![allow(dead_code)]

use kamamsr::msr::MsrParams;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

/// Exhaustive-enumeration results for one parameter set and return series.
pub struct Enumerated {
    pub filtered: Vec<Vec<f64>>,
    pub smoothed: Vec<Vec<f64>>,
    pub log_likelihood: f64,
}

fn density(p: &MsrParams, s: usize, y: f64, x: f64) -> f64 {
    let z = (y - p.mu[s] - p.beta[s] * x) / p.sigma[s];
    (-0.5 * z * z).exp() / (p.sigma[s] * (2.0 * std::f64::consts::PI).sqrt())
}

/// Joint density of `returns[1..=len]` and each of the `k^len` state paths.
fn path_weights(p: &MsrParams, returns: &[f64], len: usize) -> Vec<(Vec<usize>, f64)> {
    let k = p.k;
    let total = k.pow(len as u32);
    (0..total)
        .map(|code| {
            let mut c = code;
            let path: Vec<usize> = (0..len)
                .map(|_| {
                    let s = c % k;
                    c /= k;
                    s
                })
                .collect();
            let mut w = p.delta[path[0]] * density(p, path[0], returns[1], returns[0]);
            for t in 1..len {
                w *= p.transition[path[t - 1]][path[t]] * density(p, path[t], returns[t + 1], returns[t]);
            }
            (path, w)
        })
        .collect()
}

/// Filtered and smoothed state probabilities and log-likelihood by summing
/// over every state path. Row `j` refers to return `j + 1`.
pub fn enumerate(p: &MsrParams, returns: &[f64]) -> Enumerated {
    let n = returns.len() - 1;
    let mut filtered = Vec::with_capacity(n);
    for len in 1..=n {
        let paths = path_weights(p, returns, len);
        let z: f64 = paths.iter().map(|(_, w)| w).sum();
        let mut row = vec![0.0; p.k];
        for (path, w) in &paths {
            row[path[len - 1]] += w / z;
        }
        filtered.push(row);
    }
    let paths = path_weights(p, returns, n);
    let z: f64 = paths.iter().map(|(_, w)| w).sum();
    let mut smoothed = vec![vec![0.0; p.k]; n];
    for (path, w) in &paths {
        for (t, &s) in path.iter().enumerate() {
            smoothed[t][s] += w / z;
        }
    }
    Enumerated {
        filtered,
        smoothed,
        log_likelihood: z.ln(),
    }
}

fn random_simplex(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Random parameters with `k` states and a random return series of length
/// `t` drawn on a comparable scale.
pub fn random_instance(seed: u64, k: usize, t: usize) -> (MsrParams, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = MsrParams {
        k,
        mu: (0..k).map(|_| rng.random_range(-0.002..0.002)).collect(),
        beta: (0..k).map(|_| rng.random_range(-0.3..0.3)).collect(),
        sigma: (0..k).map(|_| rng.random_range(0.003..0.03)).collect(),
        transition: (0..k).map(|_| random_simplex(&mut rng, k)).collect(),
        delta: random_simplex(&mut rng, k),
    };
    let returns = (0..t).map(|_| rng.random_range(-0.04..0.04)).collect();
    (params, returns)
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Fraction of days on which two label sequences agree, over days where
/// `keep` holds.
pub fn agreement<T: PartialEq>(a: &[T], b: &[T], keep: impl Fn(usize) -> bool) -> f64 {
    let (mut hit, mut n) = (0usize, 0usize);
    for d in 0..a.len().min(b.len()) {
        if keep(d) {
            n += 1;
            hit += usize::from(a[d] == b[d]);
        }
    }
    if n == 0 {
        0.0
    } else {
        hit as f64 / n as f64
    }
}
