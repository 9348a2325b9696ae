//! Seed derivation for independent RNG streams.
//!
//! Every random draw in the simulator comes from a `ChaCha8Rng` whose seed is
//! derived from the run seed plus a tag and a list of ids, so that streams do
//! not depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `base`, a stream tag and a path of ids.
pub fn derive(base: u64, tag: &str, ids: &[u64]) -> u64 {
    let mut h = mix(base);
    for b in tag.bytes() {
        h = mix(h ^ u64::from(b));
    }
    for &id in ids {
        h = mix(h ^ id);
    }
    h
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
