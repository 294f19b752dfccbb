//! Deterministic RNG stream derivation.
//!
//! Every randomized stage derives its own ChaCha stream from the run seed, a
//! purpose tag and an index, so results are reproducible bit-for-bit across
//! runs, machines and worker counts.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tag keeping the RNG streams of different stages apart.
#[derive(Clone, Copy, Debug)]
pub enum StreamId {
    Synth = 1,
    Split = 2,
    Smote = 3,
    GaInit = 4,
    GaBreed = 5,
    Bootstrap = 6,
    Subsample = 7,
}

/// Derives an independent seeded stream from `(seed, stream, index)`.
pub fn derive_rng(seed: u64, stream: StreamId, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(stream as u64).to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
