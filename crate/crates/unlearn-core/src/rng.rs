//! Seed derivation.
//!
//! A single master seed fans out into named sub-seeds (data, init, relabel,
//! attack, shuffle, ...) so that each pipeline stage owns an independent,
//! reproducible stream. Attack replicas additionally get one stream per
//! (source_index, replica_index) pair, which makes generation order-independent
//! and safe to parallelize.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 step; a cheap, well-mixing 64-bit finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derives the sub-seed for a named stream from a master seed.
pub fn child_seed(master: u64, tag: &str) -> u64 {
    splitmix64(master ^ fnv1a(tag.as_bytes()))
}

/// Derives a per-item seed from a base seed and two indices.
///
/// Distinct (a, b) pairs map to distinct streams with overwhelming
/// probability; the derivation does not depend on visit order.
pub fn stream_seed(base: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(base ^ splitmix64(a)) ^ splitmix64(b.wrapping_add(0x51ed_270b)))
}

/// The RNG used throughout; ChaCha streams are stable across platforms
/// and library versions, which keeps seeded runs bit-reproducible.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
