//! Counter-keyed random streams.
//!
//! Each worker draws from its own ChaCha stream selected by `(round, worker)`
//! under the run's global seed, so a round's randomness does not depend on
//! scheduling or on how many threads execute it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream for worker `k` in outer round `round`.
pub fn worker_rng(seed: u64, round: u64, k: u64) -> ChaCha8Rng {
    debug_assert!(k < 1 << 24, "worker id exceeds stream key width");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((round << 24) | k);
    rng
}

/// Stream for auxiliary randomness that is not tied to a worker round
/// (restarts, sampled bounds). Disjoint from every [`worker_rng`] stream.
pub fn aux_rng(seed: u64, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX - tag);
    rng
}
