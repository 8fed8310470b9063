//! Seeded substreams.
//!
//! Every random quantity derives from one user seed. A work item is named by a
//! path of integers (domain tag, then indices); the path is hashed to a
//! ChaCha stream id so items can be generated in any order or in parallel
//! without changing the bytes drawn by any of them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Domain tags, the first element of a substream path.
pub mod domain {
    pub const DATASET: u64 = 1;
    pub const SIGMA: u64 = 2;
    pub const MULTISTART: u64 = 3;
    pub const TRAIN_RESTART: u64 = 4;
    pub const CHANNEL: u64 = 5;
    pub const STATE: u64 = 6;
    pub const ENSEMBLE: u64 = 7;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn stream_id(path: &[u64]) -> u64 {
    path.iter()
        .fold(0x5851_f42d_4c95_7f2d, |h, &p| splitmix64(h ^ splitmix64(p)))
}

/// Independent generator for the work item named by `path`.
pub fn substream(seed: u64, path: &[u64]) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(path));
    rng
}
