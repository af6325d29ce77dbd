//! Seeded random streams.
//!
//! Every consumer draws from its own ChaCha8 substream: the generator is seeded
//! with the base seed through `seed_from_u64`, and the stream number is a
//! SplitMix64 fold of the consumer's key words (purpose tag first, then any
//! cell indices). Two consumers with different keys never share a stream, and
//! the same (seed, key) reproduces the same draws on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags for the library's own consumers.
pub mod purpose {
    pub const HARD_MARGIN_DATA: u64 = 1;
    pub const SOFT_MARGIN_DATA: u64 = 2;
    pub const FEATURE_MAP: u64 = 3;
    pub const FISHER_CHECK: u64 = 4;
    pub const MONOTONICITY_CHECK: u64 = 5;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a key into a single 64-bit stream id.
pub fn stream_id(key: &[u64]) -> u64 {
    key.iter()
        .fold(0x243F_6A88_85A3_08D3, |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// The generator for `(seed, key)`.
pub fn substream(seed: u64, key: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(key));
    rng
}

/// Derives a child seed, for handing a fresh base seed to a nested consumer.
pub fn derive_seed(seed: u64, key: &[u64]) -> u64 {
    splitmix64(seed ^ stream_id(key))
}
