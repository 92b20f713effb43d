//! Seeded randomness.
//!
//! Every sampler in this crate draws through a [`RandomSource`]. The exact
//! samplers only ever call [`RandomSource::rand_int`] (or its 128-bit twin);
//! floating-point draws exist for the fast samplers and for synthetic data
//! generation, and are counted separately so tests can audit which path a
//! sampler took.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};

/// Deterministic pseudo-random source seeded by a 64-bit seed.
///
/// Not cryptographically vetted for production secure aggregation; the
/// point is reproducibility.
#[derive(Debug, Clone)]
pub struct RandomSource {
    rng: ChaCha12Rng,
    int_draws: u64,
    float_draws: u64,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha12Rng::seed_from_u64(seed), int_draws: 0, float_draws: 0 }
    }

    /// Independent stream for `(seed, path...)`, e.g. `(master, round, participant)`.
    pub fn derived(seed: u64, path: &[u64]) -> Self {
        Self::new(derive_seed(seed, path))
    }

    /// Uniform integer in `{1, ..., n}`.
    pub fn rand_int(&mut self, n: u64) -> Result<u64> {
        if n == 0 {
            return Err(invalid("rand_int requires n >= 1"));
        }
        self.int_draws += 1;
        Ok(self.rng.random_range(1..=n))
    }

    /// Uniform integer in `{1, ..., n}` for denominators wider than 64 bits.
    pub fn rand_int_wide(&mut self, n: u128) -> Result<u128> {
        if n == 0 {
            return Err(invalid("rand_int requires n >= 1"));
        }
        self.int_draws += 1;
        Ok(self.rng.random_range(1..=n))
    }

    /// Uniform `f64` in `[0, 1)`. Never used by the exact samplers.
    pub fn uniform_f64(&mut self) -> f64 {
        self.float_draws += 1;
        self.rng.random::<f64>()
    }

    /// One draw from a floating-point distribution (fast samplers only).
    pub fn sample_f64<D: Distribution<f64>>(&mut self, dist: &D) -> f64 {
        self.float_draws += 1;
        dist.sample(&mut self.rng)
    }

    /// Standard normal variate, for synthetic data only.
    pub fn standard_normal(&mut self) -> f64 {
        self.float_draws += 1;
        StandardNormal.sample(&mut self.rng)
    }

    /// Number of `rand_int` / `rand_int_wide` calls so far.
    pub fn int_draws(&self) -> u64 {
        self.int_draws
    }

    /// Number of floating-point draws so far.
    pub fn float_draws(&self) -> u64 {
        self.float_draws
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a stream path.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(seed ^ 0x9E37_79B9_7F4A_7C15), |acc, &p| {
        mix64(acc.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(mix64(p)))
    })
}
