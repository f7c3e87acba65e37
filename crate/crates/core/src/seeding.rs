//! Deterministic derivation of named RNG substreams.
//!
//! Every random draw in the crate comes from a ChaCha stream keyed by
//! `(master seed, purpose label, optional key)` through SHA-256, so parallel
//! generation, subset re-generation, and map iteration order never change
//! results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

fn seed_bytes(seed: u64, label: &str, extra: &[u8]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update([0xff]);
    hasher.update(label.as_bytes());
    hasher.update([0xff]);
    hasher.update(extra);
    hasher.finalize().into()
}

/// RNG for a named stream, e.g. `derive_rng(seed, "init")`.
pub fn derive_rng(seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(seed_bytes(seed, label, &[]))
}

/// RNG for a named stream with a numeric index (per wallet, per epoch, ...).
pub fn derive_rng_indexed(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(seed_bytes(seed, label, &index.to_le_bytes()))
}

/// RNG for a named stream keyed by a string (per wallet id).
pub fn derive_rng_keyed(seed: u64, label: &str, key: &str) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(seed_bytes(seed, label, key.as_bytes()))
}
