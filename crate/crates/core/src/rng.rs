//! Seed derivation for reproducible experiments.
//!
//! Every random stream is a `ChaCha8Rng` seeded with a 64-bit value derived
//! from a base seed and a path of indices (for example trial, then user).
//! The mixing is SplitMix64, so derived seeds are platform independent.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tag for random restarts of the reduced re-solve and the oracle.
pub const RESTART_STREAM: u64 = 0x5245_5354_4152_5453;

/// Stream tag for channel generation.
pub const CHANNEL_STREAM: u64 = 0x4348_414e_4e45_4c53;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `path` into `base`, one SplitMix64 round per component.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_from(base: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, path))
}
