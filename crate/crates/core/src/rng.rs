//! Deterministic random streams.
//!
//! Every replicate `r` of a run with master seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(replicate_seed(s, r))`, so results depend only
//! on `(s, r)` and never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// The SplitMix64 finalizer.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replicate `replicate` under `master`:
/// `splitmix64(master ^ splitmix64(replicate))`.
#[inline]
pub fn replicate_seed(master: u64, replicate: u64) -> u64 {
    splitmix64(master ^ splitmix64(replicate))
}

pub fn replicate_rng(master: u64, replicate: u64) -> SimRng {
    SimRng::seed_from_u64(replicate_seed(master, replicate))
}

/// Derive an independent master seed for a named sub-stream, so that
/// e.g. the dual and forward estimators of one run never share draws.
pub fn substream(master: u64, tag: &str) -> u64 {
    tag.bytes()
        .fold(splitmix64(master), |acc, b| splitmix64(acc ^ u64::from(b)))
}
