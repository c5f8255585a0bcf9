//! Deterministic seed derivation.
//!
//! Every random stream in the toolkit is keyed by a master seed plus a
//! small tuple of integers (stage tag, rank, replicate index). Child seeds
//! depend only on that tuple, so results do not change with the order in
//! which work is scheduled or with the number of worker threads.

use rand_chacha::ChaCha20Rng;
use rand::SeedableRng;

/// Stage tags mixed into child seeds.
pub mod tag {
    pub const SIMULATE: u64 = 1;
    pub const PERMUTATION: u64 = 2;
    pub const BOOTSTRAP: u64 = 3;
    pub const REPLICATE: u64 = 4;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a master seed together with a path of integers into a child seed.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &x| splitmix64(acc ^ splitmix64(x)))
}

/// The generator used throughout the crate.
pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}
