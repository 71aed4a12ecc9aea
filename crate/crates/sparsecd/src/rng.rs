//! Seeded random streams.
//!
//! Every run derives its generators from one root seed. Each purpose gets its
//! own ChaCha stream, so adding draws for one purpose never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub mod purpose {
    pub const SAMPLING: u64 = 1;
    pub const DATA: u64 = 2;
    pub const LABELS: u64 = 3;
    pub const PARTITION: u64 = 4;
    pub const INIT: u64 = 5;
    pub const PROBE: u64 = 6;
}

pub fn stream(seed: u64, purpose: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng
}

/// A child seed for sub-run `index` of `seed`; used when one logical run fans out.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
