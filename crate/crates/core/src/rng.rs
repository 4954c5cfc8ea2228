//! Seeded random streams.
//!
//! Every randomized routine takes a master seed and derives one ChaCha stream
//! per independent block of work, so merged results do not depend on how the
//! blocks were scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Stream number `index` of the generator keyed by `seed`.
pub fn stream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives a child seed for a nested campaign (e.g. one restart of an
/// optimizer that itself uses several streams).
pub fn child_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
