//! Counter-based seed derivation.
//!
//! Every random stream in a run is obtained from the run's root seed and a
//! short path of stream identifiers, so any sub-computation (one seed, one
//! strategy, one trial) can be replayed on its own.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream identifiers.
pub mod stream {
    pub const SPLIT: u64 = 1;
    pub const SEARCH: u64 = 2;
    pub const INIT: u64 = 3;
    pub const SHUFFLE: u64 = 4;
    pub const VALIDATION: u64 = 5;
    pub const SYNTH: u64 = 6;
    pub const FLIP: u64 = 7;
    pub const TRIAL: u64 = 8;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(root), |acc, &id| {
        splitmix64(acc ^ splitmix64(id))
    })
}

pub fn rng_for(root: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, path))
}
