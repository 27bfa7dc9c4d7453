//! Stable seed derivation. Every random stream in the crate is a ChaCha8
//! generator keyed by a seed mixed from its logical coordinates, so results
//! never depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a; stable across platforms and releases.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn derive(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |h, p| splitmix64(h ^ splitmix64(*p)))
}

/// Seed of one replication in a study.
pub fn rep_seed(base: u64, design: &str, scenario: &str, rep: u64) -> u64 {
    derive(
        base,
        &[fnv1a(design.as_bytes()), fnv1a(scenario.as_bytes()), rep],
    )
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// Stream tags used with `derive`.
pub(crate) const TAG_DECIDE: u64 = 1;
pub(crate) const TAG_SAMPLER: u64 = 2;
pub(crate) const TAG_BOOTSTRAP: u64 = 3;
pub(crate) const TAG_SELECT: u64 = 4;
pub(crate) const TAG_OUTCOMES: u64 = 5;
