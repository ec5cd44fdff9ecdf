//! Seed derivation shared by every stochastic component.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a stream tag and an index into an independent sub-seed.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(stream)) ^ index)
}

pub fn rng_from(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(seed: u64, stream: u64, index: u64) -> Rng {
    rng_from(derive_seed(seed, stream, index))
}

/// Stream tags, so that e.g. corpus rendering and view sampling never share draws.
pub mod stream {
    pub const CORPUS_LAYOUT: u64 = 1;
    pub const CORPUS_CLIP: u64 = 2;
    pub const PARAM_INIT: u64 = 3;
    pub const TRAIN: u64 = 4;
    pub const SHUFFLE: u64 = 5;
    pub const TASK_ITEMS: u64 = 6;
}
