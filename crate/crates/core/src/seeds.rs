//! Deterministic seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng` whose seed is derived
//! from a root seed plus a short path of integers, so parallel jobs never share
//! a stream and results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags used when deriving sub-seeds.
pub mod stream {
    pub const INPUTS: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const TEST: u64 = 3;
    pub const TRAIN: u64 = 4;
    pub const TRIAL: u64 = 5;
    pub const LIPSCHITZ: u64 = 6;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a root seed with a path of integers into a new seed.
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix(seed), |acc, &p| splitmix(acc ^ splitmix(p)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rng_at(seed: u64, path: &[u64]) -> ChaCha8Rng {
    rng(derive(seed, path))
}
