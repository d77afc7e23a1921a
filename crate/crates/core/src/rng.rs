//! Keyed random streams.
//!
//! Every draw is taken from a ChaCha stream whose key is derived from
//! `(seed, index, purpose)`, so per-sample randomness does not depend on the
//! order in which samples are generated.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyedRng {
    seed: u64,
}

impl KeyedRng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream for one `(index, purpose)` pair.
    pub fn stream(&self, index: u64, purpose: &str) -> ChaCha12Rng {
        let mut h = Sha256::new();
        h.update(b"ctsbench-rng-v1");
        h.update(self.seed.to_le_bytes());
        h.update(index.to_le_bytes());
        h.update((purpose.len() as u64).to_le_bytes());
        h.update(purpose.as_bytes());
        let digest = h.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        ChaCha12Rng::from_seed(key)
    }

    /// Stream keyed by two indices, e.g. `(repeat, query)`.
    pub fn stream2(&self, a: u64, b: u64, purpose: &str) -> ChaCha12Rng {
        let mixed = a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.rotate_left(32) ^ b;
        self.stream(mixed, &format!("{purpose}/{a}/{b}"))
    }
}
