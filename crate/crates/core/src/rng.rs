//! Reproducible random streams.
//!
//! Every estimator takes one master seed. Independent pieces of work (a
//! permutation/prefix/outer-loop cell, a bootstrap replicate, a POC run) draw
//! from their own ChaCha8 stream keyed by a path of integers, so the numbers
//! a cell sees do not depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream derived from `seed` and a key path.
pub fn substream(seed: u64, path: &[u64]) -> StreamRng {
    let mut key = splitmix64(path.len() as u64);
    for &p in path {
        key = splitmix64(key ^ splitmix64(p));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key);
    rng
}

/// Stream tags used to keep the top-level consumers of one seed apart.
pub(crate) mod tag {
    pub const PERMUTATIONS: u64 = 1;
    pub const VARIANCE_SAMPLE: u64 = 2;
    pub const CONDITIONAL_CELL: u64 = 3;
    pub const BOOTSTRAP: u64 = 4;
    pub const PICK_FREEZE: u64 = 5;
    pub const POC_RUN: u64 = 6;
    pub const REALIZATION: u64 = 7;
}
