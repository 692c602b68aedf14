//! Seed derivation for reproducible replica streams.
//!
//! Every run has one 64-bit master seed. Replica `r` of group `g` draws from a
//! `ChaCha8Rng` seeded with `split(split(master, g), r)`, where `split` mixes
//! the index into the seed through the SplitMix64 finaliser. Streams therefore
//! do not depend on thread count or scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the child seed for stream `index` of `seed`.
pub fn split(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0xA076_1D64_78BD_642F)))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// RNG for replica `replica` of group `group` under master seed `master`.
pub fn replica_rng(master: u64, group: u64, replica: u64) -> SimRng {
    rng_from_seed(split(split(master, group), replica))
}
