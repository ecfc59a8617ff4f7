//! Counter-based seed derivation.
//!
//! Every random stream in the crate is derived from a master seed and a
//! small tuple of counters, so the stream a work unit sees never depends on
//! how many other units ran before it or on which thread ran it.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// Generator used throughout the crate.
pub type Rng64 = Xoshiro256PlusPlus;

/// One round of the splitmix64 output function.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for restart `index` of a solver seeded with `seed`.
#[inline]
pub fn child_seed(seed: u64, index: u64) -> u64 {
    seed ^ splitmix64(index)
}

/// Seed for a named stream: `stream` separates purposes (splits, CV folds,
/// solver restarts...) and `index` enumerates units within it.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(stream)) ^ index)
}

pub fn rng(seed: u64) -> Rng64 {
    Rng64::seed_from_u64(seed)
}

/// Stream identifiers for [`derive_seed`].
pub mod stream {
    pub const SPLIT: u64 = 1;
    pub const CV: u64 = 2;
    pub const SOLVER: u64 = 3;
    pub const SUBSAMPLE: u64 = 4;
    pub const RBM: u64 = 5;
    pub const HELD_OUT: u64 = 6;
}
