//! Seed derivation. Every random quantity is drawn from a ChaCha8 stream
//! addressed by `(seed, stream index)`, so results do not depend on the
//! order in which rows or trials are processed.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator for substream `stream` of `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Independent child seed for item `index` (e.g. an ensemble trial).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    // Stream 0 of the child seed is reserved for lattice row 0, so child
    // seeds come from the top of the stream space.
    substream(master, u64::MAX - index).next_u64()
}
