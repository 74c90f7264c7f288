//! Seed plumbing. Every stochastic component gets its own ChaCha stream whose
//! seed is a pure function of the master seed and a path of integer tags, so a
//! run is reproducible regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

pub mod tag {
    pub const LDA: u64 = 1;
    pub const BEST_OF: u64 = 2;
    pub const BRANCHING: u64 = 3;
    pub const SLDA: u64 = 4;
    pub const FOLDS: u64 = 10;
    pub const FOLD_IN: u64 = 11;
    pub const CHILD: u64 = 12;
    pub const SPLIT: u64 = 13;
    pub const SYNTH: u64 = 14;
    pub const CALIBRATE: u64 = 15;
    pub const EXPERIMENT: u64 = 16;
    pub const GROWTH: u64 = 17;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mixes a master seed with a path of tags into a child seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn rng_from_seed(seed: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(seed)
}
