//! Seeded random streams.
//!
//! Every stochastic routine takes a base seed and a short path of tags
//! (trial index, grid cell, fold, ...). The pair maps to a ChaCha8 stream,
//! so two routines never share a sequence unless they share the full path.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Tags that keep the streams used by different stages apart.
pub mod tag {
    pub const SPLIT: u64 = 0x5350;
    pub const NOISE: u64 = 0x4e4f;
    pub const GENERATE: u64 = 0x4745;
    pub const FOLDS: u64 = 0x464f;
    pub const REBALANCE: u64 = 0x5245;
    pub const CENTERS: u64 = 0x4345;
    pub const CENTILE: u64 = 0x4354;
    pub const ESTIMATOR: u64 = 0x4553;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a tag path into a single 64-bit value.
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix(seed), |acc, &t| splitmix(acc ^ splitmix(t)))
}

/// Generator for `seed` restricted to the sub-stream named by `path`.
pub fn stream(seed: u64, path: &[u64]) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(derive(seed, path));
    rng
}
