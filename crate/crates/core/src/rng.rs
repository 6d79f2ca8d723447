//! Seeded randomness.
//!
//! Every stochastic stage draws from a [`SeededRng`] whose seed is derived from
//! a master seed with [`split_seed`]. Streams are ChaCha8, so a seed pins the
//! exact draw sequence on every platform.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::error::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer; a bijection on `u64`.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed of child stream `index` from `master`.
///
/// For a fixed master the map is injective in `index`: `(index + 1) * GAMMA`
/// is a bijection on `u64` (odd multiplier) and so are the xor and `mix64`.
pub fn split_seed(master: u64, index: u64) -> u64 {
    mix64(mix64(master) ^ index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA))
}

/// Deterministic random stream. Confined to one generation job.
#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream. Depends only on the construction seed, not on
    /// how many values this stream has already produced.
    pub fn fork(&self, index: u64) -> SeededRng {
        SeededRng::new(split_seed(self.seed, index))
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform in `[lo, hi]` (degenerate ranges return `lo`).
    #[inline]
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return lo;
        }
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `lo..=hi`.
    #[inline]
    pub fn int_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        if hi <= lo {
            return lo;
        }
        self.inner.random_range(lo..=hi)
    }

    /// Uniform index in `0..n`. `n` must be positive.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        self.inner.random_range(0..n)
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Standard normal conditioned on `[lo, hi]`, by rejection.
    pub fn truncated_normal(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo < hi) {
            return Err(Error::Config(format!(
                "truncated normal needs lo < hi, got [{lo}, {hi}]"
            )));
        }
        // Rejection is only efficient when the window carries real mass.
        if hi < -6.0 || lo > 6.0 {
            return Err(Error::Config(format!(
                "truncation window [{lo}, {hi}] has negligible normal mass"
            )));
        }
        loop {
            let z = self.normal();
            if z >= lo && z <= hi {
                return Ok(z);
            }
        }
    }

    pub fn beta(&mut self, alpha: f64, beta: f64) -> Result<f64> {
        sample_beta(alpha, beta, self)
    }

    /// Index drawn with probability proportional to `weights`.
    pub fn categorical(&mut self, weights: &[f64]) -> Result<usize> {
        let total: f64 = weights.iter().sum();
        if weights.is_empty() || !(total > 0.0) || !total.is_finite() {
            return Err(Error::Structural(format!(
                "categorical weights must have a positive finite sum, got {total}"
            )));
        }
        let target = self.uniform() * total;
        let mut acc = 0.0;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if target < acc {
                return Ok(i);
            }
        }
        // Rounding can leave target == total; land on the last positive weight.
        Ok(weights.iter().rposition(|w| *w > 0.0).unwrap_or(weights.len() - 1))
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        use rand::seq::SliceRandom;
        items.shuffle(&mut self.inner);
    }

    /// `amount` distinct indices from `0..len`, in ascending order.
    pub fn sample_indices(&mut self, len: usize, amount: usize) -> Vec<usize> {
        let mut picked = rand::seq::index::sample(&mut self.inner, len, amount.min(len)).into_vec();
        picked.sort_unstable();
        picked
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Draws from Beta(alpha, beta).
pub fn sample_beta(alpha: f64, beta: f64, rng: &mut SeededRng) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
        return Err(Error::Config(format!(
            "Beta parameters must be positive and finite, got ({alpha}, {beta})"
        )));
    }
    let dist = Beta::new(alpha, beta).map_err(|e| Error::Config(e.to_string()))?;
    Ok(dist.sample(&mut rng.inner))
}
