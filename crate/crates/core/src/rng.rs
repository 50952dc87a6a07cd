//! Seeding conventions.
//!
//! Every random stream in the crate is a `ChaCha8Rng` created with
//! `SeedableRng::seed_from_u64`. Child seeds are derived from a parent seed and
//! an integer tag with [`derive_seed`], a SplitMix64 finalizer applied to
//! `parent ^ (tag * 0x9E3779B97F4A7C15)`. Derivation never depends on the
//! order in which cells, instances or trials are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent child seed from `parent` and `tag`.
pub fn derive_seed(parent: u64, tag: u64) -> u64 {
    splitmix64(parent ^ tag.wrapping_mul(GOLDEN))
}

/// Derives a seed from a chain of tags, left to right.
pub fn derive_seed_path(parent: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(parent, |s, &t| derive_seed(s, t))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
