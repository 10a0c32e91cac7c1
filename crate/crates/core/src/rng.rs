//! Seed derivation for independent, reproducible RNG streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags used to keep the per-purpose generators of one debate apart.
pub mod stream {
    pub const AGENT: u64 = 0x0100_0000;
    pub const SETUP: u64 = 0x0200_0000;
    pub const TASKS: u64 = 0x0300_0000;
    pub const PAIRS: u64 = 0x0400_0000;
    pub const SHUFFLE: u64 = 0x0500_0000;
    pub const SPLIT: u64 = 0x0600_0000;
    pub const DEBATE: u64 = 0x0700_0000;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a stream identifier.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(base) ^ stream.rotate_left(17) ^ 0xD6E8_FEB8_6659_FD93)
}

pub fn stream_rng(base: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, stream))
}
