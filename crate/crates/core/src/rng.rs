//! Seed plumbing. Every randomized component draws from a ChaCha8 stream so
//! runs replay bit-for-bit across platforms.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Root generator for a run.
pub fn from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent generator for a named purpose within a run.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Child generator derived from a parent, used to give each tree its own stream.
pub fn fork(parent: &mut Rng) -> Rng {
    ChaCha8Rng::seed_from_u64(parent.next_u64())
}

/// Stream ids used by the pipelines.
pub mod streams {
    pub const MODELS: u64 = 1;
    pub const FOREST: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const ANOMALIES: u64 = 4;
}
