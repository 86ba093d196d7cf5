//! Random number streams.
//!
//! Every stochastic routine draws from a ChaCha8 generator keyed by
//! `(seed, stream)`. ChaCha's 64-bit stream id selects an independent
//! keystream for the same key, so chains that share a seed but use distinct
//! stream ids never overlap. Stream ids are composed hierarchically with
//! [`substream`] so that, for example, replicate `r` of a scenario and
//! iteration `k` of an EM fit inside it get a stable, unique id regardless of
//! the order in which work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Child stream id `child` under `parent` (SplitMix64 finalizer over the pair).
pub fn substream(parent: u64, child: u64) -> u64 {
    let mut z = parent
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(child)
        .wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
