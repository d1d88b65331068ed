//! Seed derivation for reproducible runs.
//!
//! Every random stream in a run is a `ChaCha8Rng` seeded through
//! [`derive_seed`], so independent streams (scene layout, object placement,
//! per-episode control, weight init) never share state and a run is fully
//! determined by the master seed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; good avalanche, cheap, stable across platforms.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent child seed from `(seed, salt)`.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    mix(seed ^ mix(salt))
}

/// ChaCha stream for a derived `(seed, salt)` pair.
pub fn stream(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, salt))
}

/// Salts naming the independent random streams of a run.
pub mod salt {
    pub const LAYOUT: u64 = 0x11;
    pub const PLACEMENT: u64 = 0x22;
    pub const INIT: u64 = 0x33;
    pub const SHUFFLE: u64 = 0x44;
    pub const EPISODE: u64 = 0x55;
    pub const EVAL: u64 = 0x66;
}
