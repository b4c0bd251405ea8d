//! Counter-based seed derivation.
//!
//! Every random decision draws from a `ChaCha8Rng` whose seed is a pure
//! function of the root seed and a small tuple of counters (stream tag,
//! phase, pass, ...). Streams therefore do not depend on how many values
//! earlier consumers drew.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SchedRng = ChaCha8Rng;

/// Stream tags for [`derive_seed`].
pub mod tag {
    pub const PASS: u64 = 1;
    pub const BASELINE_SHARDS: u64 = 2;
    pub const PLAN: u64 = 3;
    pub const LEARNER: u64 = 4;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `counters` into `root` one word at a time through splitmix64.
pub fn derive_seed(root: u64, counters: &[u64]) -> u64 {
    counters
        .iter()
        .fold(splitmix64(root), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

pub fn rng_for(root: u64, counters: &[u64]) -> SchedRng {
    SchedRng::seed_from_u64(derive_seed(root, counters))
}
