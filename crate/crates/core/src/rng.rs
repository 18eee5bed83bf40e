//! Seeded random streams.
//!
//! Every random draw in the crate comes from ChaCha8 (`rand_chacha`), a
//! counter-based generator: a 64-bit seed selects the key, a 64-bit stream id
//! selects an independent sequence, and the word position addresses a point
//! inside that sequence. Work items that need randomness in parallel code seek
//! to a position derived from their index, so the values they see do not
//! depend on scheduling or thread count.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator for `stream` under `seed`, positioned at the start.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generator for `stream` under `seed`, positioned at 32-bit word `word_pos`.
pub fn stream_at(seed: u64, stream_id: u64, word_pos: u128) -> ChaCha8Rng {
    let mut rng = stream(seed, stream_id);
    rng.set_word_pos(word_pos);
    rng
}

/// Derive a child seed from `seed` and a path of tags.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(seed, |acc, &tag| stream(acc, tag).next_u64())
}
