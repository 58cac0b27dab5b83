//! Seeded, platform-independent random streams.
//!
//! Every random draw in the crate goes through [`SeededRng`], a thin wrapper
//! around ChaCha8 with hand-written integer and float sampling so that
//! projections, splits and score initializations are bit-reproducible
//! regardless of `rand` version or target platform.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// SplitMix64 finalizer; used to derive independent child seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed `k` of `master`. Depends only on `(master, k)`.
pub fn derive_seed(master: u64, k: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(k.wrapping_add(0xA076_1D64_78BD_642F)))
}

/// Stream identifiers so that different consumers of one master seed never
/// share a random sequence.
pub mod stream {
    pub const PROJECTION: u64 = 1;
    pub const SCORES: u64 = 2;
    pub const SPLIT: u64 = 3;
    pub const SUBMODEL: u64 = 4;
    pub const ELM_WEIGHTS: u64 = 5;
    pub const REPLICATE: u64 = 6;
}

pub struct SeededRng {
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Stream `stream` of `seed`, see [`stream`].
    pub fn for_stream(seed: u64, stream: u64) -> Self {
        Self::new(derive_seed(seed, stream))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `[0, n)` by Lemire's multiply-and-reject method.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "empty range");
        let n = n as u64;
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.next_u64() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as usize;
            }
        }
    }

    /// Uniform float in `[0, 1)` with 53 random bits.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform float in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// In-place Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// `k` distinct indices from `[0, n)` by a partial Fisher–Yates pass over
    /// the identity permutation; returned in ascending order.
    pub fn sample_without_replacement(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot draw {k} of {n}");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool.sort_unstable();
        pool
    }
}
