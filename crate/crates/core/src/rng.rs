//! Deterministic seed derivation.
//!
//! Every random stream in the workspace is keyed by a path of integers and
//! strings hashed into a 64-bit seed, so results never depend on iteration
//! or thread scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// A seed that can be extended with further key components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedPath(u64);

impl SeedPath {
    pub fn new(seed: u64) -> Self {
        SeedPath(splitmix64(seed))
    }

    pub fn with_u64(self, v: u64) -> Self {
        SeedPath(splitmix64(self.0 ^ splitmix64(v.wrapping_add(0x5851_F42D_4C95_7F2D))))
    }

    pub fn with_str(self, s: &str) -> Self {
        SeedPath(splitmix64(self.0 ^ fnv1a(s.as_bytes()).rotate_left(17)))
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

/// Shorthand for a ChaCha stream seeded directly from `seed`.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
