//! Deterministic seed derivation.
//!
//! Every stochastic component owns a [`ChaCha8Rng`] seeded from the run seed
//! and a fixed stream tag, so that components never share random state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_ENV: u64 = 1;
pub const STREAM_POLICY_INIT: u64 = 2;
pub const STREAM_VALUE_INIT: u64 = 3;
pub const STREAM_COST_VALUE_INIT: u64 = 4;
pub const STREAM_CRITIC_INIT: u64 = 5;
pub const STREAM_ACTION: u64 = 6;
pub const STREAM_MINIBATCH: u64 = 7;
pub const STREAM_AGENT: u64 = 8;

/// SplitMix64 finaliser over (seed, stream).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}
