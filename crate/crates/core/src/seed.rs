//! Counter-based seed derivation.
//!
//! Every random stream in the crate is keyed by a 64-bit seed plus a small
//! tuple of counters (column index, trial index, stream tag). Keys are
//! folded through the SplitMix64 finalizer so that nearby counters give
//! unrelated seeds, and independent work items never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fold a sequence of counters into `seed`, one SplitMix64 step per word.
pub fn derive_seed(seed: u64, words: &[u64]) -> u64 {
    words.iter().fold(mix64(seed), |acc, &w| {
        mix64(acc.wrapping_add(GOLDEN_GAMMA).wrapping_add(mix64(w)))
    })
}

/// A ChaCha8 generator keyed by `seed` on stream `stream`.
///
/// ChaCha streams are disjoint for a fixed key, so `(seed, j)` pairs give
/// independent generators without any derivation collisions.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
