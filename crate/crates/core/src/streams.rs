//! Deterministic random streams for replicated work.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for replicate `index` of a run seeded with `seed`.
///
/// Streams are independent ChaCha sequences, so results do not depend on the
/// order in which replicates are scheduled.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
