//! Reproducible random streams.
//!
//! A stream is the pair `(seed, stream id)` fed to ChaCha8, whose native
//! 64-bit stream parameter gives independent sequences for the same key.
//! Callers that fan out over loop indices derive one stream per index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub const fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn generator(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Same key, different stream id.
    pub fn at(&self, stream: u64) -> Self {
        Self {
            seed: self.seed,
            stream,
        }
    }

    /// A fresh key for a sub-computation tagged by `domain`.
    pub fn derive(&self, domain: u64) -> Self {
        let key = mix64(self.seed ^ mix64(self.stream.wrapping_add(mix64(domain))));
        Self {
            seed: key,
            stream: 0,
        }
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// `n` i.i.d. standard normal draws.
pub fn gaussian_vector(rng: &RngStream, n: usize) -> Vec<f64> {
    let mut gen = rng.generator();
    (0..n).map(|_| StandardNormal.sample(&mut gen)).collect()
}
