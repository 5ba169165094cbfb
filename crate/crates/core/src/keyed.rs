//! Keyed pseudo-random draws.
//!
//! Every random decision in the pipeline is a pure function of a 64-bit seed,
//! a domain string and an item key (usually a clip or video id). Results do
//! not depend on iteration order, thread count or platform, so shards can be
//! processed independently and still agree with a sequential run.
//!
//! The construction is FNV-1a (64-bit) over the UTF-8 bytes of the domain and
//! key, combined with the seed through two rounds of the SplitMix64
//! finalizer:
//!
//! ```text
//! x = splitmix64(splitmix64(seed ^ fnv1a(domain)) ^ fnv1a(key))
//! ```

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

pub fn keyed_u64(seed: u64, domain: &str, key: &str) -> u64 {
    splitmix64(splitmix64(seed ^ fnv1a64(domain.as_bytes())) ^ fnv1a64(key.as_bytes()))
}

/// Uniform draw in `[0, 1)` with 53 bits of resolution.
pub fn keyed_unit(seed: u64, domain: &str, key: &str) -> f64 {
    (keyed_u64(seed, domain, key) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw in the open interval `(0, 1)`; safe to pass to `ln`.
pub fn keyed_open_unit(seed: u64, domain: &str, key: &str) -> f64 {
    ((keyed_u64(seed, domain, key) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Derives a per-stage seed from the top-level run seed.
pub fn split_seed(seed: u64, stage: &str) -> u64 {
    keyed_u64(seed, "stage-seed", stage)
}
