//! Seeded randomness.
//!
//! Every stochastic step (splits, shuffles, initialization, dropout,
//! synthetic text) draws from ChaCha8 seeded through
//! `SeedableRng::seed_from_u64`, and shuffles use rand's Fisher-Yates
//! `SliceRandom::shuffle`. Versions are pinned by `Cargo.lock`, so a seed
//! reproduces bit-for-bit.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as Rng;

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Derive an independent stream for a named sub-task.
pub fn derived(seed: u64, stream: &str) -> Rng {
    let digest = crate::sha256_hex(format!("{seed}:{stream}").as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&hex::decode(&digest[..16]).expect("hex digest"));
    Rng::seed_from_u64(u64::from_le_bytes(bytes))
}
