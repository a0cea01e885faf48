//! Sampling configuration and the deterministic randomness behind every
//! sampled estimate.
//!
//! Each sample gets its own generator seeded from `(seed, repetition,
//! sample)`, so the draws do not depend on how work is split across threads.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_DELTA: f64 = 0.25;

/// Sample count per repetition, number of repetitions and seed of a sampled
/// estimator. `epsilon` and `delta` are the accuracy target the defaults were
/// derived from; they are carried along for reporting and for checks that
/// measure the achieved accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub samples: usize,
    pub reps: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub delta: f64,
}

impl SamplingConfig {
    /// Defaults for `n_agents` agents: `m = ⌈4·n·(n−1)/ε²⌉` (at least 1)
    /// samples and the smallest odd repetition count `≥ 8·ln(1/δ)`.
    pub fn from_accuracy(n_agents: usize, epsilon: f64, delta: f64, seed: u64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(SamplingConfig {
            samples: default_samples(n_agents, epsilon),
            reps: default_reps(delta),
            seed,
            epsilon,
            delta,
        })
    }

    /// Explicit sample and repetition counts with the default accuracy
    /// annotations.
    pub fn new(samples: usize, reps: usize, seed: u64) -> Result<Self> {
        let cfg = SamplingConfig {
            samples,
            reps,
            seed,
            epsilon: DEFAULT_EPSILON,
            delta: DEFAULT_DELTA,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_reps(mut self, reps: usize) -> Self {
        self.reps = reps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Config("sample count must be at least 1".into()));
        }
        if self.reps == 0 || self.reps % 2 == 0 {
            return Err(Error::Config(format!(
                "repetition count must be odd and positive, got {}",
                self.reps
            )));
        }
        Ok(())
    }
}

pub fn default_samples(n_agents: usize, epsilon: f64) -> usize {
    let n = n_agents as f64;
    ((4.0 * n * (n - 1.0) / (epsilon * epsilon)).ceil() as usize).max(1)
}

pub fn default_reps(delta: f64) -> usize {
    let k = ((8.0 * (1.0 / delta).ln()).ceil() as usize).max(1);
    if k % 2 == 0 {
        k + 1
    } else {
        k
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn sample_seed(seed: u64, rep: u64, sample: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ rep) ^ sample)
}

pub(crate) fn sample_rng(seed: u64, rep: usize, sample: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sample_seed(seed, rep as u64, sample as u64))
}

/// Overwrites `perm` with the uniformly random permutation of sample
/// `(rep, sample)`.
pub(crate) fn permutation(perm: &mut [usize], seed: u64, rep: usize, sample: usize) {
    for (k, p) in perm.iter_mut().enumerate() {
        *p = k;
    }
    perm.shuffle(&mut sample_rng(seed, rep, sample));
}

/// Index of the median of an odd-length slice; among equal values the
/// smallest index.
pub(crate) fn median_index(values: &[f64]) -> usize {
    debug_assert!(values.len() % 2 == 1);
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let med = values[order[values.len() / 2]];
    (0..values.len())
        .find(|&k| values[k].total_cmp(&med).is_eq())
        .expect("median is one of the values")
}

#[cfg(test)]
pub(crate) fn median(values: &[f64]) -> f64 {
    values[median_index(values)]
}
