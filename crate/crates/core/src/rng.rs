//! Seeded randomness.
//!
//! Every stochastic routine takes a [`RandomSource`] explicitly. Parallel fan-out
//! derives one stream per work item with [`split_seed`], so results do not
//! depend on the number of threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RandomSource = ChaCha8Rng;

pub fn seeded(seed: u64) -> RandomSource {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for work item `index` under `root`: `splitmix64(splitmix64(root) + index)`.
///
/// Hashing the root first keeps the streams of nearby roots apart, so
/// `split_seed(r, i + 1)` and `split_seed(r + 1, i)` are unrelated.
pub fn split_seed(root: u64, index: u64) -> u64 {
    splitmix64(splitmix64(root).wrapping_add(index))
}
