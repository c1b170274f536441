//! Seeded pseudo-random streams.
//!
//! Every random draw in the crate goes through [`SeedStream`], a ChaCha8
//! keystream (RFC 7539 block function, 8 rounds) keyed by a 64-bit seed via
//! `rand_core`'s PCG32-based `seed_from_u64` expansion. Floats are built
//! directly from the raw 64-bit words (`(w >> 11) * 2^-53`), so the mapping
//! from seed to values depends only on the ChaCha keystream and not on any
//! distribution code that could change between `rand` releases.
//!
//! Child seeds for cells, instances and episodes are derived with
//! [`derive_seed`], which folds a list of words through the SplitMix64
//! finalizer.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Debug, Clone)]
pub struct SeedStream {
    rng: ChaCha8Rng,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform double in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n` (multiply-high reduction).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a sequence of words into a single child seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x005E_ED0F_0AA0_u64, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}
