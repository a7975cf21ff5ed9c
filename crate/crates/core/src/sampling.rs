//! Monte Carlo estimation of delta(P^n, Q^n) for regimes beyond the
//! exact engines.
//!
//! The estimator samples outcome strings from P^n and averages
//! max(0, 1 - Q^n(z)/P^n(z)), which equals the distance because only the
//! event P^n > Q^n contributes to it. Likelihood ratios accumulate in log
//! domain; strings that P cannot produce are never sampled, and a string
//! with Q-probability zero contributes exactly 1.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::ProductQuery;

/// Two-sided 97.5% normal quantile, for the 95% interval half-width.
const Z_95: f64 = 1.959_963_984_540_054;

/// A seeded Monte Carlo estimate with a normal-approximation interval.
/// The per-sample variable is bounded in [0, 1], so the approximation is
/// well behaved at the sample counts the estimator accepts.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub half_width_95: f64,
    pub samples: u64,
    pub seed: u64,
    /// Independent generator streams whose partial sums are combined in
    /// fixed order; the result depends only on (seed, samples, shards).
    pub shards: u32,
}

impl McEstimate {
    pub fn contains(&self, value: f64) -> bool {
        (self.mean - value).abs() <= self.half_width_95
    }
}

/// Estimate delta(P^n, Q^n) from `samples` draws of P^n on one stream.
pub fn mc_distance(query: &ProductQuery<f64>, samples: u64, seed: u64) -> Result<McEstimate> {
    mc_distance_sharded(query, samples, seed, 1)
}

/// Sharded estimator: shard `i` draws from an independent stream of the
/// same seeded generator, and shard sums are combined in shard order.
pub fn mc_distance_sharded(
    query: &ProductQuery<f64>,
    samples: u64,
    seed: u64,
    shards: u32,
) -> Result<McEstimate> {
    if samples < 100 {
        return Err(Error::out_of_range("need at least 100 samples"));
    }
    if shards == 0 {
        return Err(Error::out_of_range("need at least one shard"));
    }
    let (_, pp, qq) = crate::dist::aligned(&query.p, &query.q);

    // Sampling table over the support of P only.
    let mut cumulative = Vec::with_capacity(pp.len());
    let mut log_ratio = Vec::with_capacity(pp.len());
    let mut acc = 0.0f64;
    for (&p, &q) in pp.iter().zip(&qq) {
        if p == 0.0 {
            continue;
        }
        acc += p;
        cumulative.push(acc);
        log_ratio.push(q.ln() - p.ln());
    }
    if let Some(last) = cumulative.last_mut() {
        *last = f64::INFINITY;
    }

    let per_shard = samples / shards as u64;
    let remainder = samples % shards as u64;
    let mut sum = 0.0f64;
    let mut sum_sq = 0.0f64;
    for shard in 0..shards {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(shard as u64);
        let count = per_shard + u64::from((shard as u64) < remainder);
        for _ in 0..count {
            let mut log_lr = 0.0f64;
            for _ in 0..query.n {
                let u: f64 = rng.random();
                let idx = cumulative.partition_point(|&c| c < u);
                log_lr += log_ratio[idx.min(log_ratio.len() - 1)];
            }
            // max(0, 1 - exp(log_lr)), with -inf meaning Q misses the string.
            let x = if log_lr >= 0.0 {
                0.0
            } else if log_lr == f64::NEG_INFINITY {
                1.0
            } else {
                -log_lr.exp_m1()
            };
            sum += x;
            sum_sq += x * x;
        }
    }

    let nf = samples as f64;
    let mean = sum / nf;
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    Ok(McEstimate {
        mean,
        half_width_95: Z_95 * (var / nf).sqrt(),
        samples,
        seed,
        shards,
    })
}
