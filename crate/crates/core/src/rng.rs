//! The single PRNG used by every randomized routine.
//!
//! SplitMix64 is fixed so that reports stay byte-stable across releases of
//! the `rand` crate family.

use rand::SeedableRng;
pub use rand_xoshiro::SplitMix64 as Prng;

pub fn prng(seed: u64) -> Prng {
    Prng::seed_from_u64(seed)
}

/// Independent stream `stream` derived from `seed`.
pub fn substream(seed: u64, stream: u64) -> Prng {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    Prng::seed_from_u64(z ^ (z >> 31))
}
